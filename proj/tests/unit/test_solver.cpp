#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fairguard/data.hpp"
#include "fairguard/metrics.hpp"
#include "fairguard/rng.hpp"
#include "fairguard/solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace fairguard;

namespace {

// 1-d feature plus a constant column, so linear classifiers are thresholds.
Dataset threshold_dataset(const std::vector<double>& x, std::vector<int> y, std::vector<int> z) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(x.size()), 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    f(static_cast<Eigen::Index>(i), 0) = x[i];
    f(static_cast<Eigen::Index>(i), 1) = 1.0;
  }
  return Dataset(f, std::move(y), std::move(z), 2);
}

// Every labeling a threshold classifier 1[a x + b >= 0] can produce on the
// data: both directions at each cut between sorted points, plus constants.
std::vector<Predictions> threshold_labelings(const Dataset& d) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < d.size(); ++i) xs.push_back(d.features()(static_cast<Eigen::Index>(i), 0));
  std::vector<double> cuts{-1e300, 1e300};
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) cuts.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  std::vector<Predictions> out;
  for (double c : cuts) {
    Predictions up(d.size()), down(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      up[i] = xs[i] >= c ? 1 : 0;
      down[i] = xs[i] <= c ? 1 : 0;
    }
    out.push_back(up);
    out.push_back(down);
  }
  return out;
}


Dataset synthetic_default() { return generate_synthetic(SyntheticConfig{}); }

double train_accuracy(const SolveResult& r, const Dataset& d) {
  return 1.0 - empirical_error(d, predict_hard(r.classifier, d));
}

double sr_of(const SolveResult& r, const Dataset& d) {
  return fairness_value(group_performance(d, predict_hard(r.classifier, d), MetricSpec::statistical_rate()));
}

RobustParams params_of(double eta, double tau, double delta, std::vector<double> lambda) {
  RobustParams p;
  p.eta = eta;
  p.tau = tau;
  p.delta = delta;
  p.lambda = lambda;
  p.gamma = std::move(lambda);
  return p;
}

}  // namespace

TEST_CASE("constrained minimizer on small programs") {
  SolverConfig cfg;
  cfg.seed = 1;

  ConstrainedProblem bowl;
  bowl.dim = 2;
  bowl.objective = [](const Eigen::VectorXd& t, Eigen::VectorXd* g) {
    const Eigen::Vector2d d = t - Eigen::Vector2d(1, 2);
    if (g) *g = 2 * d;
    return d.squaredNorm();
  };
  const auto a = constrained_minimize(bowl, cfg);
  CHECK(a.feasible);
  CHECK(std::abs(a.classifier.theta[0] - 1) <= 1e-3);
  CHECK(std::abs(a.classifier.theta[1] - 2) <= 1e-3);

  ConstrainedProblem active;
  active.dim = 1;
  active.objective = [](const Eigen::VectorXd& t, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Ones(1);
    return t[0];
  };
  active.constraints = [](const Eigen::VectorXd& t) { return Eigen::VectorXd::Constant(1, t[0] - 3.0); };
  const auto b = constrained_minimize(active, cfg);
  CHECK(b.feasible);
  CHECK(std::abs(b.classifier.theta[0] - 3) <= 1e-3);

  ConstrainedProblem kkt;
  kkt.dim = 2;
  kkt.objective = [](const Eigen::VectorXd& t, Eigen::VectorXd* g) {
    if (g) *g = 2 * t;
    return t.squaredNorm();
  };
  kkt.constraints = [](const Eigen::VectorXd& t) { return Eigen::VectorXd::Constant(1, t[0] + t[1] - 2.0); };
  const auto c = constrained_minimize(kkt, cfg);
  CHECK(c.feasible);
  CHECK(std::abs(c.classifier.theta[0] - 1) <= 1e-3);
  CHECK(std::abs(c.classifier.theta[1] - 1) <= 1e-3);
  CHECK(std::abs(c.objective - 2) <= 1e-3);

  // Contradictory constraints cannot be met from any start.
  ConstrainedProblem none;
  none.dim = 1;
  none.objective = active.objective;
  none.constraints = [](const Eigen::VectorXd& t) {
    Eigen::VectorXd v(2);
    v << t[0] - 1.0, -t[0];
    return v;
  };
  cfg.restarts = 3;
  const auto d = constrained_minimize(none, cfg);
  CHECK_FALSE(d.feasible);
  CHECK(d.restarts_used == 3);

  ConstrainedProblem bad;
  bad.dim = 1;
  bad.objective = [](const Eigen::VectorXd&, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Zero(1);
    return std::nan("");
  };
  CHECK_THROWS(constrained_minimize(bad, cfg));
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.restarts = 0;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.temperature = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.conv_tol = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("unconstrained fit") {
  SolverConfig cfg;
  const Dataset syn = synthetic_default();
  const auto r = fit_unconstrained(syn, cfg);
  CHECK(r.feasible);
  CHECK(train_accuracy(r, syn) >= 0.99);
  CHECK(sr_of(r, syn) >= 0.77);
  CHECK(sr_of(r, syn) <= 0.83);

  // All labels 1.
  const Dataset ones = threshold_dataset({-3, -1, 0.5, 2, 4, -2}, {1, 1, 1, 1, 1, 1}, {1, 1, 1, 2, 2, 2});
  const auto o = fit_unconstrained(ones, cfg);
  for (int p : predict_hard(o.classifier, ones)) CHECK(p == 1);

  // Symmetric data: every point has a mirror -x with the opposite label, so
  // the best classifier passes through the origin. Grid-search the angle.
  Rng rng = make_rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const int half = 150;
  Eigen::MatrixXd f(2 * half, 2);
  std::vector<int> y(2 * half), z(2 * half);
  for (int i = 0; i < half; ++i) {
    const double a = g(rng), b = g(rng);
    const int lab = (a + 0.5 * b + 0.6 * g(rng)) >= 0 ? 1 : 0;
    f.row(i) << a, b;
    f.row(half + i) << -a, -b;
    y[static_cast<std::size_t>(i)] = lab;
    y[static_cast<std::size_t>(half + i)] = 1 - lab;
    z[static_cast<std::size_t>(i)] = i % 2 + 1;
    z[static_cast<std::size_t>(half + i)] = i % 2 + 1;
  }
  const Dataset mirror(f, y, z, 2);
  double best = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const double ang = 2 * M_PI * k / 20000.0;
    const LinearClassifier c(Eigen::Vector2d(std::cos(ang), std::sin(ang)));
    best = std::max(best, 1.0 - empirical_error(mirror, predict_hard(c, mirror)));
  }
  const auto m = fit_unconstrained(mirror, cfg);
  const double acc = train_accuracy(m, mirror);
  CHECK(acc <= best + 1e-12);
  CHECK(acc >= best - 0.03);
}

TEST_CASE("target-fair fit") {
  SolverConfig cfg;
  const Dataset syn = synthetic_default();
  const auto u = fit_unconstrained(syn, cfg);
  const auto t0 = fit_target_fair(syn, MetricSpec::statistical_rate(), 0.0, cfg);
  CHECK(std::abs(t0.objective - u.objective) <= 1e-6);

  const auto t8 = fit_target_fair(syn, MetricSpec::statistical_rate(), 0.8, cfg);
  CHECK(t8.feasible);
  CHECK(sr_of(t8, syn) >= 0.78);
  CHECK(t8.fairness_threshold == 0.8);

  // Disjoint group supports: among thresholds only the constant classifiers
  // reach SR = 1, and labels are mostly positive.
  std::vector<double> x;
  std::vector<int> y, z;
  for (int i = 0; i < 20; ++i) {
    x.push_back(1.0 + i * 0.05);
    y.push_back(i % 5 == 0 ? 0 : 1);
    z.push_back(1);
    x.push_back(-2.0 + i * 0.05);
    y.push_back(i % 4 == 0 ? 0 : 1);
    z.push_back(2);
  }
  const Dataset disjoint = threshold_dataset(x, y, z);
  for (const auto& lab : threshold_labelings(disjoint)) {
    const double sr = fairness_value(group_performance(disjoint, lab, MetricSpec::statistical_rate()));
    if (sr >= 1.0) {
      const auto ones = std::count(lab.begin(), lab.end(), 1);
      CHECK((ones == 0 || ones == static_cast<long>(lab.size())));
    }
  }
  const auto r = fit_target_fair(disjoint, MetricSpec::statistical_rate(), 1.0, cfg);
  CHECK(r.feasible);
  const auto preds = predict_hard(r.classifier, disjoint);
  CHECK(static_cast<double>(std::count(preds.begin(), preds.end(), 1)) >= 0.99 * static_cast<double>(preds.size()));

  CHECK_THROWS(fit_target_fair(syn, MetricSpec::statistical_rate(), 1.5, cfg));
}

TEST_CASE("target-fair objective is monotone in tau") {
  Rng rng = make_rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x;
  std::vector<int> y, z;
  for (int i = 0; i < 60; ++i) {
    const int grp = i % 2 + 1;
    const double v = g(rng) + (grp == 1 ? 0.8 : -0.8);
    x.push_back(v);
    y.push_back(v + 0.5 * g(rng) > 0 ? 1 : 0);
    z.push_back(grp);
  }
  const Dataset d = threshold_dataset(x, y, z);
  SolverConfig cfg;
  double prev = -1.0;
  for (double tau : {0.0, 0.2, 0.4, 0.6, 0.8, 0.9}) {
    const auto r = fit_target_fair(d, MetricSpec::statistical_rate(), tau, cfg);
    INFO("tau = " << tau << ", SR = " << sr_of(r, d));
    CHECK(r.feasible);
    CHECK(r.objective >= prev - 1e-3);
    prev = r.objective;
  }
}

TEST_CASE("robust threshold") {
  CHECK(robust_fairness_threshold(params_of(0.0, 0.8, 0.0, {0.3, 0.4})) == 0.8);
  CHECK(std::abs(robust_fairness_threshold(params_of(0.05, 0.8, 0.01, {0.25, 0.25})) - 0.30052) <= 1e-5);
  // Oracle from the closed form: x = 0.24.
  CHECK(robust_fairness_threshold(params_of(0.05, 0.8, 0.01, {0.25, 0.5})) ==
        doctest::Approx(0.8 * (0.76 / 1.24) * (0.76 / 1.24)).epsilon(1e-14));
  CHECK_THROWS_WITH(robust_fairness_threshold(params_of(0.05, 0.8, 0.0, {0.05, 0.5})),
                    doctest::Contains("assumption violated"));
}

TEST_CASE("scaling parameter") {
  CHECK(compute_scaling_s(params_of(0.0, 0.8, 0.0, {0.5, 0.5}), 100) == 1.0);
  CHECK(compute_scaling_s(params_of(0.0, 0.8, 0.0, {0.2, 0.3, 0.4}), 30) == 1.0);

  // Dense independent grid over eta_1 + eta_2 <= 0.06 at step 1e-4.
  const double lam = 0.5, budget = 0.06;
  const auto term = [&](double el, double ek) {
    return ((1 - el / lam) / (1 + (ek - el) / lam)) * ((1 + (el - ek) / lam) / (1 + el / lam));
  };
  double oracle = 1.0;
  const int steps = static_cast<int>(std::lround(budget / 1e-4));
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const double e1 = i * 1e-4, e2 = j * 1e-4;
      oracle = std::min({oracle, term(e1, e2), term(e2, e1), term(e1, e1), term(e2, e2)});
    }
  }
  const double s = compute_scaling_s(params_of(0.05, 0.8, 0.01, {lam, lam}), default_scaling_resolution(2));
  CHECK(std::abs(s - oracle) <= 1e-3);

  // Lower bound over random valid parameter sets.
  Rng rng = make_rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 2 + rep % 2;
    std::vector<double> lambda(static_cast<std::size_t>(p)), gamma(static_cast<std::size_t>(p));
    for (int l = 0; l < p; ++l) {
      lambda[static_cast<std::size_t>(l)] = 0.1 + 0.4 * u(rng);
      gamma[static_cast<std::size_t>(l)] = lambda[static_cast<std::size_t>(l)] + (1.0 - lambda[static_cast<std::size_t>(l)]) * u(rng) * 0.5;
    }
    const double minl = *std::min_element(lambda.begin(), lambda.end());
    RobustParams prm;
    prm.tau = 0.5 + 0.5 * u(rng);
    prm.eta = 0.9 * minl * u(rng) * 0.5;
    prm.delta = (minl - prm.eta) * 0.5 * u(rng);
    prm.lambda = lambda;
    prm.gamma = gamma;
    const double x = (prm.eta + prm.delta) / minl;
    const double bound = ((1 - x) / (1 + x)) * ((1 - x) / (1 + x));
    const double sv = compute_scaling_s(prm, p == 2 ? 400 : 60);
    CHECK(sv >= bound - 1e-12);
    CHECK(sv <= 1.0);
    CHECK(prm.tau * sv >= robust_fairness_threshold(prm) - 1e-12);
  }
  CHECK(default_scaling_resolution(2) == 2000);
  const int r4 = default_scaling_resolution(4);
  double count = 1.0;
  for (int i = 1; i <= 4; ++i) count = count * (r4 + i) / i;
  CHECK(count <= 2e6);
}

TEST_CASE("elementary inequality behind the robust threshold") {
  Rng rng = make_rng(69);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 1000) {
    const double alpha = 1.0 - u(rng);  // (0, 1]
    const double eta = u(rng), delta = u(rng);
    const double x = (eta + delta) / alpha;
    if (!(x < 1.0)) continue;
    ++checked;
    const double r = (1 - x) / (1 + x);
    CHECK(r * r >= 1 - 4 * x);
  }
}

TEST_CASE("error-tolerant fits") {
  SolverConfig cfg;
  const Dataset syn = synthetic_default();
  const auto sr = MetricSpec::statistical_rate();

  // Vanishing eta, delta and lambda collapse the program onto the target-fair one.
  const auto lim = fit_err_tolerant(syn, sr, params_of(0.0, 0.8, 1e-12, {1e-6, 1e-6}), cfg);
  const auto tf = fit_target_fair(syn, sr, 0.8, cfg);
  CHECK(std::abs(lim.objective - tf.objective) <= 1e-3);

  // Single spec: identical to the general program.
  const RobustParams hp = heuristic_params(syn, {sr}, 0.05, 0.8, 0.01);
  const auto one = fit_err_tolerant(syn, sr, hp, cfg);
  const auto gen = fit_general_err_tolerant(syn, {sr}, hp, cfg);
  CHECK(one.classifier.theta == gen.classifier.theta);
  CHECK(one.objective == gen.objective);
  CHECK(one.fairness_threshold == doctest::Approx(robust_fairness_threshold(hp)));

  // Plus at eta = delta = 0: threshold tau.
  const auto plus0 = fit_err_tolerant_plus(syn, sr, params_of(0.0, 0.8, 0.0, hp.lambda), cfg);
  CHECK(plus0.fairness_threshold == 0.8);
  const auto plus = fit_err_tolerant_plus(syn, sr, hp, cfg);
  CHECK(plus.fairness_threshold >= one.fairness_threshold);
  CHECK(plus.feasible);
  CHECK(sr_of(plus, syn) >= plus.fairness_threshold - 1e-9);

  CHECK_THROWS_WITH(fit_err_tolerant(syn, sr, params_of(0.05, 0.8, 0.01, {0.05, 0.05}), cfg),
                    doctest::Contains("assumption violated"));
}

TEST_CASE("heuristic lambda") {
  const Dataset syn = synthetic_default();
  const auto sr = MetricSpec::statistical_rate();
  const auto fpr = MetricSpec::false_positive_rate();
  const auto cond = heuristic_params(syn, {sr}, 0.05, 0.8, 0.01, LambdaHeuristic::kConditioningMass);
  CHECK(cond.lambda[0] == doctest::Approx(0.5));
  CHECK(cond.lambda == cond.gamma);
  const auto lab = heuristic_params(syn, {sr}, 0.05, 0.8, 0.01);
  // Positive mass per group: 250/1000 and 200/1000.
  CHECK(lab.lambda[0] == doctest::Approx(0.25));
  CHECK(lab.lambda[1] == doctest::Approx(0.20));
  CHECK(lab.gamma[0] == doctest::Approx(0.5));
  // FPR's plug-in mass is zero, so it falls back to the negatives' mass.
  const auto f = heuristic_params(syn, {fpr}, 0.05, 0.8, 0.01);
  CHECK(f.lambda[0] == doctest::Approx(0.25));
  CHECK(f.lambda[1] == doctest::Approx(0.30));
  const auto both = heuristic_params(syn, {sr, fpr}, 0.05, 0.8, 0.01);
  CHECK(both.lambda[1] == doctest::Approx(0.20));
  // Group 2 positive mass 0.2 sits below eta + delta = 0.21: clamped to the boundary.
  const auto edge = heuristic_params(syn, {sr}, 0.2, 0.8, 0.01);
  CHECK(edge.lambda[0] == doctest::Approx(0.25));
  CHECK(edge.lambda[1] > 0.21);
  CHECK(edge.lambda[1] < 0.21 + 1e-5);
  CHECK(robust_fairness_threshold(edge) < 1e-8);
}

TEST_CASE("general program with two metrics") {
  SolverConfig cfg;
  const Dataset syn = synthetic_default();
  const std::vector<MetricSpec> specs{MetricSpec::statistical_rate(), MetricSpec::false_positive_rate()};
  const RobustParams hp = heuristic_params(syn, specs, 0.0, 0.8, 0.01);
  const auto r = fit_general_err_tolerant(syn, specs, hp, cfg);
  if (r.feasible) {
    const auto preds = predict_hard(r.classifier, syn);
    for (const auto& s : specs) {
      CHECK(fairness_value(group_performance(syn, preds, s)) >= r.fairness_threshold - 1e-9);
    }
  }
  CHECK(r.constraint_slacks.size() >= 2);
}

TEST_CASE("contradictory metrics are infeasible") {
  // Group 1 is all positive, group 2 all negative. Any classifier that selects
  // in both groups has FDR ratio 0; selecting in one group gives SR ratio 0;
  // selecting nothing violates the mass floors.
  std::vector<double> x;
  std::vector<int> y, z;
  for (int i = 0; i < 10; ++i) {
    x.push_back(1.0 + i);
    y.push_back(1);
    z.push_back(1);
    x.push_back(11.0 + i);
    y.push_back(0);
    z.push_back(2);
  }
  const Dataset d = threshold_dataset(x, y, z);
  const std::vector<MetricSpec> specs{MetricSpec::statistical_rate(), MetricSpec::false_discovery_rate()};
  const RobustParams prm = params_of(0.0, 1.0, 0.001, {0.02, 0.02});
  const double thr = robust_fairness_threshold(prm);
  const double floor = 0.02 - 0.001;

  int feasible_thresholds = 0;
  for (const auto& lab : threshold_labelings(d)) {
    bool ok = true;
    for (const auto& s : specs) {
      const auto t = group_performance(d, lab, s);
      ok = ok && fairness_value(t) >= thr;
      for (double m : t.numerators) ok = ok && m >= floor;
    }
    feasible_thresholds += ok ? 1 : 0;
  }
  REQUIRE(feasible_thresholds == 0);

  SolverConfig cfg;
  cfg.restarts = 3;
  const auto r = fit_general_err_tolerant(d, specs, prm, cfg);
  CHECK_FALSE(r.feasible);
  CHECK(r.restarts_used == 3);
}

TEST_CASE("solves are deterministic per seed") {
  const Dataset syn = synthetic_default();
  SolverConfig cfg;
  cfg.seed = 9;
  const auto a = fit_target_fair(syn, MetricSpec::statistical_rate(), 0.9, cfg);
  const auto b = fit_target_fair(syn, MetricSpec::statistical_rate(), 0.9, cfg);
  CHECK(a.classifier.theta == b.classifier.theta);
  CHECK(a.objective == b.objective);
}
