#include "fairguard/theory_lab.hpp"

#include "fairguard/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fairguard {
namespace {

using nlohmann::json;

FiniteDistribution make_grid(std::string name, std::vector<std::string> symbols,
                             const std::vector<std::array<double, 2>>& mass_by_xz,
                             const std::vector<std::array<int, 2>>& label_by_xz) {
  std::vector<DomainPoint> points;
  std::vector<double> mass;
  for (std::size_t x = 0; x < symbols.size(); ++x) {
    for (int z = 1; z <= 2; ++z) {
      points.push_back({static_cast<int>(x), z, label_by_xz[x][static_cast<std::size_t>(z - 1)]});
      mass.push_back(mass_by_xz[x][static_cast<std::size_t>(z - 1)]);
    }
  }
  return FiniteDistribution(std::move(name), std::move(symbols), 2, std::move(points),
                            std::move(mass));
}

std::vector<std::array<int, 2>> constant_labels(std::initializer_list<int> per_x) {
  std::vector<std::array<int, 2>> out;
  for (int y : per_x) out.push_back({y, y});
  return out;
}

std::uint64_t enumeration_size(int cells) {
  if (cells > 30) throw std::invalid_argument("domain too large to enumerate");
  return std::uint64_t{1} << cells;
}

json metrics_json(const ExactMetrics& m) { return {{"err", m.err}, {"omega", m.omega}}; }

json classifier_json(const EnumClassifier& clf, const FiniteDistribution& dist) {
  return {{"code", clf.code()}, {"assignment", clf.describe(dist)}};
}

json no_good_json(const NoGoodReport& r, const FiniteDistribution& dist) {
  json j{{"family", r.family},
         {"err_bound", r.err_bound},
         {"omega_bound", r.omega_bound},
         {"classifiers_checked", r.classifiers_checked},
         {"counterexample_count", r.counterexamples.size()}};
  j["tight_omega"] = r.tight_omega ? json(*r.tight_omega) : json(nullptr);
  json ces = json::array();
  for (const auto& ce : r.counterexamples) {
    json per = json::array();
    for (const auto& m : ce.per_distribution) per.push_back(metrics_json(m));
    ces.push_back({{"classifier", classifier_json(ce.classifier, dist)}, {"metrics", per}});
  }
  j["counterexamples"] = ces;
  return j;
}

json witness_json(const WitnessReport& r, const FiniteDistribution& dist) {
  json per = json::array();
  for (const auto& w : r.per_distribution) {
    json e{{"distribution", w.distribution}, {"witnesses", w.witnesses}};
    e["first"] = w.first ? classifier_json(*w.first, dist) : json(nullptr);
    e["first_metrics"] = w.first_metrics ? metrics_json(*w.first_metrics) : json(nullptr);
    e["best_err_at_omega"] = w.best_err_at_omega ? json(*w.best_err_at_omega) : json(nullptr);
    per.push_back(e);
  }
  return {{"family", r.family},
          {"err", r.criterion.err.describe()},
          {"omega", r.criterion.omega.describe()},
          {"per_distribution", per}};
}

FiniteDistribution apply_override(const FiniteDistribution& dist, const TheoryParams& params,
                                  const std::string& key) {
  const auto it = params.mass_overrides.find(key);
  if (it == params.mass_overrides.end()) return dist;
  return with_masses(dist, it->second);
}

}  // namespace

EnumClassifier EnumClassifier::from_code(std::uint64_t code, int num_cells, int num_groups) {
  EnumClassifier clf;
  clf.num_groups = num_groups;
  clf.outputs.resize(static_cast<std::size_t>(num_cells));
  for (int i = 0; i < num_cells; ++i) clf.outputs[static_cast<std::size_t>(i)] = (code >> i) & 1U;
  return clf;
}

std::uint64_t EnumClassifier::code() const {
  std::uint64_t code = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i] != 0) code |= std::uint64_t{1} << i;
  }
  return code;
}

std::string EnumClassifier::describe(const FiniteDistribution& dist) const {
  std::ostringstream out;
  const int nx = static_cast<int>(dist.x_ids().size());
  for (int x = 0; x < nx; ++x) {
    for (int z = 1; z <= num_groups; ++z) {
      if (x > 0 || z > 1) out << ' ';
      out << dist.x_ids()[static_cast<std::size_t>(x)] << z << '=' << (*this)(x, z);
    }
  }
  return out.str();
}

DistributionTriple build_family_a(double c, double alpha) {
  if (!(c > 0.0 && c < 0.5)) throw std::invalid_argument("family A needs c in (0, 1/2)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("family A needs alpha in (0, 1)");
  const std::vector<std::string> xs{"A", "B", "C"};
  const auto labels = constant_labels({1, 0, 0});
  const double a = alpha;
  return {
      make_grid("D1", xs,
                {{c * (1 - a), c * a / 2}, {(1 - c) * (1 - a), a * (1 - c) / 2}, {a / 2, 0.0}},
                labels),
      make_grid("D2", xs,
                {{c * (1 - a), c * a / 2}, {(1 - c) * (1 - a / 2), 0.0}, {c * a / 2, a * (1 - c) / 2}},
                labels),
      make_grid("D3", xs,
                {{c * (1 - a / 2), 0.0}, {(1 - c) * (1 - a), a * (1 - c) / 2}, {a * (1 - c) / 2, c * a / 2}},
                labels),
  };
}

DistributionTriple build_family_b(double lambda, double c) {
  if (!(lambda > 0.0 && lambda <= 0.25)) {
    throw std::invalid_argument("family B needs lambda in (0, 1/4]");
  }
  if (!(c > 0.0 && c <= 2.0 * lambda / 9.0 + 1e-15)) {
    throw std::invalid_argument("family B needs c in (0, 2 lambda / 9]");
  }
  const std::vector<std::string> xs{"A", "B", "C", "D", "E"};
  const auto labels = constant_labels({1, 1, 1, 1, 0});
  const double bulk1 = 0.5 - lambda - c / 2;
  const double bulk2 = lambda - c;
  // Distribution k empties cell (x_k, 1) and doubles (x_k, 2).
  DistributionTriple out;
  for (int k = 0; k < 3; ++k) {
    std::vector<std::array<double, 2>> m(5);
    for (int x = 0; x < 3; ++x) m[static_cast<std::size_t>(x)] = x == k ? std::array{0.0, c} : std::array{c / 2, c / 2};
    m[3] = {bulk1, bulk2};
    m[4] = {bulk1, bulk2};
    out[static_cast<std::size_t>(k)] = make_grid("D" + std::to_string(k + 1), xs, m, labels);
  }
  return out;
}

std::pair<FiniteDistribution, FiniteDistribution> build_family_c(double eta) {
  if (!(eta > 0.0 && eta <= 0.5)) throw std::invalid_argument("family C needs eta in (0, 1/2]");
  const std::vector<std::string> xs{"A", "B", "C"};
  const std::vector<std::array<double, 2>> m{{eta / 2, eta / 2}, {0.5 - eta, 0.5 - eta}, {eta / 2, eta / 2}};
  return {make_grid("P", xs, m, {{1, 0}, {1, 1}, {0, 1}}),
          make_grid("Q", xs, m, {{0, 1}, {1, 1}, {1, 0}})};
}

FiniteDistribution with_masses(const FiniteDistribution& dist, std::vector<double> mass) {
  return FiniteDistribution(dist.name(), dist.x_ids(), dist.num_groups(), dist.points(),
                            std::move(mass));
}

PerformanceTable exact_performance(const FiniteDistribution& dist, const EnumClassifier& clf,
                                   const MetricSpec& spec) {
  if (static_cast<int>(clf.outputs.size()) != dist.num_cells()) {
    throw std::invalid_argument("classifier does not cover the distribution's domain");
  }
  const auto p = static_cast<std::size_t>(dist.num_groups());
  PerformanceTable t;
  t.q.resize(p);
  t.numerators.assign(p, 0.0);
  t.denominators.assign(p, 0.0);
  for (std::size_t i = 0; i < dist.points().size(); ++i) {
    const auto& pt = dist.points()[i];
    const int pred = clf(pt.x, pt.z);
    const auto g = static_cast<std::size_t>(pt.z - 1);
    if (spec.conditioning(pred, pt.y)) t.denominators[g] += dist.mass()[i];
    if (spec.joint(pred, pt.y)) t.numerators[g] += dist.mass()[i];
  }
  for (std::size_t g = 0; g < p; ++g) {
    if (t.denominators[g] > 0.0) t.q[g] = t.numerators[g] / t.denominators[g];
  }
  return t;
}

ExactMetrics exact_metrics(const FiniteDistribution& dist, const EnumClassifier& clf,
                           const MetricSpec& spec) {
  ExactMetrics m;
  for (std::size_t i = 0; i < dist.points().size(); ++i) {
    const auto& pt = dist.points()[i];
    if (clf(pt.x, pt.z) != pt.y) m.err += dist.mass()[i];
  }
  m.omega = fairness_value(exact_performance(dist, clf, spec));
  return m;
}

bool Bound::holds(double v) const {
  switch (cmp) {
    case Comparison::kLess: return v < value - kExactSlack;
    case Comparison::kLessEqual: return v <= value + kExactSlack;
    case Comparison::kGreater: return v > value + kExactSlack;
    case Comparison::kGreaterEqual: return v >= value - kExactSlack;
    case Comparison::kEqual: return std::abs(v - value) <= kExactSlack;
  }
  return false;
}

std::string Bound::describe() const {
  const char* op = "?";
  switch (cmp) {
    case Comparison::kLess: op = "<"; break;
    case Comparison::kLessEqual: op = "<="; break;
    case Comparison::kGreater: op = ">"; break;
    case Comparison::kGreaterEqual: op = ">="; break;
    case Comparison::kEqual: op = "=="; break;
  }
  std::ostringstream out;
  out.precision(17);
  out << op << ' ' << value;
  return out.str();
}

NoGoodReport verify_no_good_classifier(std::span<const FiniteDistribution> dists,
                                       const MetricSpec& spec, double err_bound,
                                       double omega_bound, std::string family) {
  if (dists.empty()) throw std::invalid_argument("no distributions to check");
  const int cells = dists[0].num_cells();
  for (const auto& d : dists) {
    if (d.num_cells() != cells || d.x_ids() != dists[0].x_ids()) {
      throw std::invalid_argument("distributions must share one domain");
    }
  }
  const Bound err_ok{Comparison::kLess, err_bound};
  const Bound omega_ok{Comparison::kGreaterEqual, omega_bound};

  NoGoodReport r;
  r.family = std::move(family);
  r.err_bound = err_bound;
  r.omega_bound = omega_bound;
  const std::uint64_t total = enumeration_size(cells);
  for (std::uint64_t code = 0; code < total; ++code) {
    const auto clf = EnumClassifier::from_code(code, cells, dists[0].num_groups());
    std::vector<ExactMetrics> per;
    bool low_err = true;
    bool fair = true;
    double min_omega = std::numeric_limits<double>::infinity();
    for (const auto& d : dists) {
      per.push_back(exact_metrics(d, clf, spec));
      low_err = low_err && err_ok.holds(per.back().err);
      fair = fair && omega_ok.holds(per.back().omega);
      min_omega = std::min(min_omega, per.back().omega);
    }
    ++r.classifiers_checked;
    if (low_err) r.tight_omega = std::max(r.tight_omega.value_or(-1.0), min_omega);
    if (low_err && fair) r.counterexamples.push_back({clf, std::move(per)});
  }
  return r;
}

std::pair<double, double> family_a_no_good_bounds(double c, double alpha) {
  return {c * (1 - alpha), c + alpha};
}

std::pair<double, double> family_b_no_good_bounds(double lambda, double c) {
  return {0.5 - lambda - c / 2,
          1 - c * (1 - 4 * lambda) / (2 * lambda) + 3 * c * c / (4 * lambda * lambda)};
}

WitnessCriterion family_a_witness_criterion(double c, double alpha, bool strict) {
  return {{strict ? Comparison::kLess : Comparison::kLessEqual, c * alpha / 2},
          {Comparison::kGreater, 1 - alpha}};
}

WitnessCriterion family_b_witness_criterion(double c) {
  return {{Comparison::kLessEqual, 1.5 * c}, {Comparison::kEqual, 1.0}};
}

WitnessCriterion family_c_witness_criterion() {
  return {{Comparison::kEqual, 0.0}, {Comparison::kEqual, 1.0}};
}

bool WitnessReport::passed() const {
  return !per_distribution.empty() &&
         std::all_of(per_distribution.begin(), per_distribution.end(),
                     [](const DistributionWitness& w) { return w.witnesses > 0; });
}

WitnessReport verify_good_classifier_exists(std::span<const FiniteDistribution> dists,
                                            const MetricSpec& spec,
                                            const WitnessCriterion& criterion,
                                            std::string family) {
  WitnessReport r;
  r.family = std::move(family);
  r.criterion = criterion;
  for (const auto& d : dists) {
    DistributionWitness w;
    w.distribution = d.name();
    const std::uint64_t total = enumeration_size(d.num_cells());
    for (std::uint64_t code = 0; code < total; ++code) {
      const auto clf = EnumClassifier::from_code(code, d.num_cells(), d.num_groups());
      const ExactMetrics m = exact_metrics(d, clf, spec);
      if (!criterion.omega.holds(m.omega)) continue;
      w.best_err_at_omega = std::min(w.best_err_at_omega.value_or(m.err), m.err);
      if (!criterion.err.holds(m.err)) continue;
      if (w.witnesses++ == 0) {
        w.first = clf;
        w.first_metrics = m;
      }
    }
    r.per_distribution.push_back(std::move(w));
  }
  return r;
}

CrossCheckReport verify_family_c_error_sum(const FiniteDistribution& p,
                                           const FiniteDistribution& q, double eta) {
  if (p.x_ids() != q.x_ids() || p.num_groups() != q.num_groups()) {
    throw std::invalid_argument("P and Q must share one domain");
  }
  CrossCheckReport r;
  r.eta = eta;
  r.min_error_sum = std::numeric_limits<double>::infinity();
  const Bound ok{Comparison::kGreaterEqual, 2 * eta};
  const MetricSpec sr = MetricSpec::statistical_rate();
  const std::uint64_t total = enumeration_size(p.num_cells());
  for (std::uint64_t code = 0; code < total; ++code) {
    const auto clf = EnumClassifier::from_code(code, p.num_cells(), p.num_groups());
    const double sum = exact_metrics(p, clf, sr).err + exact_metrics(q, clf, sr).err;
    r.min_error_sum = std::min(r.min_error_sum, sum);
    ++r.classifiers_checked;
    if (!ok.holds(sum)) r.violators.push_back(clf);
  }
  return r;
}

Dataset sample_from(const FiniteDistribution& dist, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample size must be positive");
  auto rng = make_rng(seed);
  std::discrete_distribution<std::size_t> pick(dist.mass().begin(), dist.mass().end());
  const auto nx = static_cast<Eigen::Index>(dist.x_ids().size());
  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), nx);
  std::vector<int> labels(n);
  std::vector<int> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pt = dist.points()[pick(rng)];
    features(static_cast<Eigen::Index>(i), pt.x) = 1.0;
    labels[i] = pt.y;
    groups[i] = pt.z;
  }
  return Dataset(std::move(features), std::move(labels), std::move(groups), dist.num_groups(),
                 Dataset::Coverage::kAllowEmptyGroups);
}

PerturbationRecord perturb_half_flip(const Dataset& dataset, int kept_symbol, double eta,
                                     std::uint64_t seed) {
  if (dataset.num_groups() != 2) throw std::invalid_argument("half-flip mixing needs two groups");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> groups = dataset.groups();
  std::vector<bool> mask(dataset.size(), false);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int x = one_hot_index(dataset.features().row(static_cast<Eigen::Index>(i)));
    if (x == kept_symbol) continue;
    if (unif(rng) > 0.5) {
      groups[i] = 3 - groups[i];
      mask[i] = true;
      ++flipped;
    }
  }
  PerturbationRecord rec;
  rec.budget_eta = eta;
  rec.budget = budget_count(eta, dataset.size());
  rec.kind = "half-flip";
  rec.rng_seed = seed;
  if (static_cast<double>(flipped) > eta * static_cast<double>(dataset.size())) {
    rec.flip_mask.assign(dataset.size(), false);
    rec.perturbed = dataset;
    rec.budget_exceeded = true;
  } else {
    rec.flip_mask = std::move(mask);
    rec.perturbed = dataset.with_groups(std::move(groups));
  }
  return rec;
}

double max_joint_deviation(const Dataset& onehot, const FiniteDistribution& dist) {
  const int nx = static_cast<int>(dist.x_ids().size());
  const int p = dist.num_groups();
  std::vector<double> counts(static_cast<std::size_t>(nx * p * 2), 0.0);
  const auto slot = [&](int x, int z, int y) {
    return static_cast<std::size_t>((x * p + (z - 1)) * 2 + y);
  };
  for (std::size_t i = 0; i < onehot.size(); ++i) {
    const int x = one_hot_index(onehot.features().row(static_cast<Eigen::Index>(i)));
    counts[slot(x, onehot.group(i), onehot.label(i))] += 1.0;
  }
  const auto n = static_cast<double>(onehot.size());
  double worst = 0.0;
  for (int x = 0; x < nx; ++x) {
    for (int z = 1; z <= p; ++z) {
      for (int y = 0; y <= 1; ++y) {
        worst = std::max(worst, std::abs(counts[slot(x, z, y)] / n - dist.point_mass(x, z, y)));
      }
    }
  }
  return worst;
}

TheoryParams theory_params_from_json(const json& j) {
  TheoryParams p;
  p.family_a_c = j.value("family_a_c", p.family_a_c);
  p.family_a_alpha = j.value("family_a_alpha", p.family_a_alpha);
  p.family_b_lambda = j.value("family_b_lambda", p.family_b_lambda);
  p.family_b_c = j.value("family_b_c", p.family_b_c);
  p.family_c_eta = j.value("family_c_eta", p.family_c_eta);
  p.strict_family_a_witness = j.value("strict_family_a_witness", p.strict_family_a_witness);
  p.coupling_eta = j.value("coupling_eta", p.coupling_eta);
  p.coupling_budget_n = j.value("coupling_budget_n", p.coupling_budget_n);
  p.coupling_budget_trials = j.value("coupling_budget_trials", p.coupling_budget_trials);
  p.coupling_budget_rate = j.value("coupling_budget_rate", p.coupling_budget_rate);
  p.coupling_freq_n = j.value("coupling_freq_n", p.coupling_freq_n);
  p.coupling_freq_tol = j.value("coupling_freq_tol", p.coupling_freq_tol);
  p.coupling_replicates = j.value("coupling_replicates", p.coupling_replicates);
  p.seed = j.value("seed", p.seed);
  if (j.contains("mass_overrides")) {
    p.mass_overrides = j.at("mass_overrides").get<std::map<std::string, std::vector<double>>>();
  }
  return p;
}

json to_json(const TheoryParams& p) {
  return {{"family_a_c", p.family_a_c},
          {"family_a_alpha", p.family_a_alpha},
          {"family_b_lambda", p.family_b_lambda},
          {"family_b_c", p.family_b_c},
          {"family_c_eta", p.family_c_eta},
          {"strict_family_a_witness", p.strict_family_a_witness},
          {"coupling_eta", p.coupling_eta},
          {"coupling_budget_n", p.coupling_budget_n},
          {"coupling_budget_trials", p.coupling_budget_trials},
          {"coupling_budget_rate", p.coupling_budget_rate},
          {"coupling_freq_n", p.coupling_freq_n},
          {"coupling_freq_tol", p.coupling_freq_tol},
          {"coupling_replicates", p.coupling_replicates},
          {"seed", p.seed},
          {"mass_overrides", p.mass_overrides}};
}

CouplingReport check_coupling(const FiniteDistribution& source, const FiniteDistribution& target,
                              const TheoryParams& params) {
  CouplingReport r;
  r.eta = params.coupling_eta;
  r.n_budget = params.coupling_budget_n;
  r.trials = params.coupling_budget_trials;
  for (int t = 0; t < r.trials; ++t) {
    const std::uint64_t s = derive_seed(params.seed, static_cast<std::uint64_t>(t));
    const Dataset d = sample_from(source, r.n_budget, s);
    if (!perturb_tv_coupling(d, source, target, r.eta, derive_seed(s, 1)).budget_exceeded) {
      ++r.within_budget;
    }
  }
  r.success_rate = r.trials > 0 ? static_cast<double>(r.within_budget) / r.trials : 0.0;

  r.n_freq = params.coupling_freq_n;
  for (std::uint64_t a = 0; a < 100 && !r.freq_success; ++a) {
    r.freq_seed = derive_seed(params.seed ^ 0x636f75706c696e67ULL, a);
    const Dataset d = sample_from(source, r.n_freq, r.freq_seed);
    const auto rec = perturb_tv_coupling(d, source, target, r.eta, derive_seed(r.freq_seed, 1));
    if (rec.budget_exceeded) continue;
    r.freq_success = true;
    r.max_deviation = max_joint_deviation(rec.perturbed, target);
  }
  r.passed = r.success_rate >= params.coupling_budget_rate && r.freq_success &&
             r.max_deviation <= params.coupling_freq_tol;

  // How often a single draw of this size lands outside the tolerance.
  double total = 0.0;
  for (int k = 0; k < params.coupling_replicates; ++k) {
    const std::uint64_t s = derive_seed(params.seed ^ 0x7265706c69636174ULL, static_cast<std::uint64_t>(k));
    const Dataset d = sample_from(source, r.n_freq, s);
    const auto rec = perturb_tv_coupling(d, source, target, r.eta, derive_seed(s, 1));
    if (rec.budget_exceeded) continue;
    const double dev = max_joint_deviation(rec.perturbed, target);
    ++r.replicates;
    total += dev;
    if (dev > params.coupling_freq_tol) ++r.replicate_exceedances;
  }
  if (r.replicates > 0) r.replicate_mean_deviation = total / r.replicates;
  return r;
}

MixingReport check_family_c_mixing(const FiniteDistribution& p, const TheoryParams& params) {
  MixingReport r;
  r.eta = params.family_c_eta;
  r.n = params.coupling_freq_n;
  const int a = p.x_index("A");
  const int b = p.x_index("B");
  for (std::uint64_t attempt = 0; attempt < 100 && !r.success; ++attempt) {
    r.seed = derive_seed(params.seed ^ 0x6d6978696e67ULL, attempt);
    const Dataset d = sample_from(p, r.n, r.seed);
    const auto rec = perturb_half_flip(d, b, r.eta, derive_seed(r.seed, 1));
    if (rec.budget_exceeded) continue;
    r.success = true;
    double counts[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < rec.perturbed.size(); ++i) {
      if (one_hot_index(rec.perturbed.features().row(static_cast<Eigen::Index>(i))) != a) continue;
      counts[rec.perturbed.label(i)][rec.perturbed.group(i) - 1] += 1.0;
    }
    for (auto& row : counts) {
      for (double c : row) {
        r.max_deviation = std::max(r.max_deviation, std::abs(c / r.n - r.eta / 4));
      }
    }
  }
  r.passed = r.success && r.max_deviation <= params.coupling_freq_tol;
  return r;
}

bool TheoryReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const NamedCheck& c) { return !c.gating || c.passed; });
}

const NamedCheck& TheoryReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no check named '" + name + "'");
}

json TheoryReport::to_json() const {
  json arr = json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"gating", c.gating}, {"detail", c.detail}});
  }
  return {{"passed", passed()}, {"checks", arr}};
}

TheoryReport verify_all(const TheoryParams& params) {
  TheoryReport report;
  const MetricSpec sr = MetricSpec::statistical_rate();
  const auto add = [&](std::string name, bool passed, json detail, bool gating = true) {
    report.checks.push_back({std::move(name), passed, gating, std::move(detail)});
  };

  // Family A.
  {
    const double c = params.family_a_c;
    const double alpha = params.family_a_alpha;
    DistributionTriple fam = build_family_a(c, alpha);
    for (int k = 0; k < 3; ++k) {
      fam[static_cast<std::size_t>(k)] =
          apply_override(fam[static_cast<std::size_t>(k)], params, "A" + std::to_string(k + 1));
    }
    const auto [eb, ob] = family_a_no_good_bounds(c, alpha);
    const NoGoodReport ng = verify_no_good_classifier(fam, sr, eb, ob, "A");
    add("family_a.no_good_classifier", ng.passed(), no_good_json(ng, fam[0]));

    const bool strict = params.strict_family_a_witness;
    const WitnessReport w =
        verify_good_classifier_exists(fam, sr, family_a_witness_criterion(c, alpha, strict), "A");
    add("family_a.witnesses", w.passed(), witness_json(w, fam[0]));
    const WitnessReport w_alt =
        verify_good_classifier_exists(fam, sr, family_a_witness_criterion(c, alpha, !strict), "A");
    add(strict ? "family_a.witnesses_non_strict" : "family_a.witnesses_strict", w_alt.passed(),
        witness_json(w_alt, fam[0]), false);

    // 1[x = A] on D1: zero error and Omega = (1 - alpha) / (1 - alpha / 2).
    EnumClassifier indicator{{1, 1, 0, 0, 0, 0}, 2};
    const ExactMetrics m = exact_metrics(fam[0], indicator, sr);
    const double expected = (1 - alpha) / (1 - alpha / 2);
    add("family_a.indicator_on_d1",
        Bound{Comparison::kEqual, 0.0}.holds(m.err) && Bound{Comparison::kEqual, expected}.holds(m.omega),
        {{"metrics", metrics_json(m)}, {"expected_omega", expected}});

    double tv = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        tv = std::max(tv, total_variation(fam[static_cast<std::size_t>(i)], fam[static_cast<std::size_t>(j)]));
      }
    }
    add("family_a.pairwise_tv", Bound{Comparison::kLessEqual, alpha}.holds(tv),
        {{"max_tv", tv}, {"bound", alpha}});

    const CouplingReport cr = check_coupling(fam[0], fam[1], params);
    add("coupling.d1_to_d2", cr.passed,
        {{"eta", cr.eta},
         {"n_budget", cr.n_budget},
         {"trials", cr.trials},
         {"within_budget", cr.within_budget},
         {"success_rate", cr.success_rate},
         {"required_rate", params.coupling_budget_rate},
         {"n_freq", cr.n_freq},
         {"freq_seed", cr.freq_seed},
         {"freq_success", cr.freq_success},
         {"max_deviation", cr.max_deviation},
         {"tolerance", params.coupling_freq_tol},
         {"replicates", cr.replicates},
         {"replicate_exceedances", cr.replicate_exceedances},
         {"replicate_mean_deviation", cr.replicate_mean_deviation}});
  }

  // Family B.
  {
    const double lambda = params.family_b_lambda;
    const double c = params.family_b_c;
    DistributionTriple fam = build_family_b(lambda, c);
    for (int k = 0; k < 3; ++k) {
      fam[static_cast<std::size_t>(k)] =
          apply_override(fam[static_cast<std::size_t>(k)], params, "B" + std::to_string(k + 1));
    }
    const auto [eb, ob] = family_b_no_good_bounds(lambda, c);
    const NoGoodReport ng = verify_no_good_classifier(fam, sr, eb, ob, "B");
    add("family_b.no_good_classifier", ng.passed(), no_good_json(ng, fam[0]));

    const WitnessReport w =
        verify_good_classifier_exists(fam, sr, family_b_witness_criterion(c), "B");
    add("family_b.witnesses", w.passed(), witness_json(w, fam[0]));

    // f1 = 1 on x in {B, D} and on (C, 2).
    EnumClassifier f1{{0, 0, 1, 1, 0, 1, 1, 1, 0, 0}, 2};
    const ExactMetrics m = exact_metrics(fam[0], f1, sr);
    add("family_b.known_witness_on_d1",
        Bound{Comparison::kLessEqual, 1.5 * c}.holds(m.err) && Bound{Comparison::kEqual, 1.0}.holds(m.omega),
        {{"classifier", classifier_json(f1, fam[0])}, {"metrics", metrics_json(m)}});

    double tv = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        tv = std::max(tv, total_variation(fam[static_cast<std::size_t>(i)], fam[static_cast<std::size_t>(j)]));
      }
    }
    add("family_b.pairwise_tv", Bound{Comparison::kLessEqual, c}.holds(tv),
        {{"max_tv", tv}, {"bound", c}});
  }

  // Family C.
  {
    const double eta = params.family_c_eta;
    auto [p, q] = build_family_c(eta);
    p = apply_override(p, params, "CP");
    q = apply_override(q, params, "CQ");
    const std::array<FiniteDistribution, 2> pq{p, q};
    const WitnessReport w =
        verify_good_classifier_exists(pq, sr, family_c_witness_criterion(), "C");
    add("family_c.witnesses", w.passed(), witness_json(w, p));

    const CrossCheckReport cc = verify_family_c_error_sum(p, q, eta);
    json violators = json::array();
    for (const auto& v : cc.violators) violators.push_back(classifier_json(v, p));
    add("family_c.error_sum", cc.passed(),
        {{"classifiers_checked", cc.classifiers_checked},
         {"min_error_sum", cc.min_error_sum},
         {"bound", 2 * eta},
         {"violators", violators}});

    double marginal_gap = 0.0;
    for (int x = 0; x < static_cast<int>(p.x_ids().size()); ++x) {
      for (int z = 1; z <= 2; ++z) marginal_gap = std::max(marginal_gap, std::abs(p.xz_mass(x, z) - q.xz_mass(x, z)));
    }
    const double tv = total_variation(p, q);
    add("family_c.marginals_and_tv",
        marginal_gap <= kExactSlack && Bound{Comparison::kEqual, 2 * eta}.holds(tv),
        {{"max_marginal_gap", marginal_gap}, {"tv", tv}, {"expected_tv", 2 * eta}});

    const MixingReport mr = check_family_c_mixing(p, params);
    add("family_c.mixing_closed_form", mr.passed,
        {{"eta", mr.eta},
         {"n", mr.n},
         {"seed", mr.seed},
         {"success", mr.success},
         {"max_deviation", mr.max_deviation},
         {"tolerance", params.coupling_freq_tol}});
  }
  return report;
}

}  // namespace fairguard
