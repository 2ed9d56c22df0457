#include "fairguard/solver.hpp"

#include "fairguard/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fairguard {
namespace {

constexpr int kMaxOuterIters = 30;
constexpr int kLbfgsMemory = 8;
constexpr double kInitialPenalty = 10.0;
constexpr double kMaxPenalty = 1e8;
// Re-solves of a fairness program whose soft optimum misses the hard constraints.
constexpr int kTighteningRounds = 4;
constexpr double kTighteningPad = 0.005;
// Margin above eta + delta for label masses at the assumption boundary.
constexpr double kBoundaryPad = 1e-6;
constexpr double kArmijo = 1e-4;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

struct InnerResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iters = 0;
};

using SmoothFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// L-BFGS with backtracking Armijo line search.
InnerResult lbfgs(const SmoothFn& fun, Eigen::VectorXd x, int budget, double tol) {
  Eigen::VectorXd g(x.size());
  double f = fun(x, &g);
  InnerResult out{x, f, 0};
  if (!std::isfinite(f) || !all_finite(g)) return out;

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;

  while (out.iters < budget) {
    if (g.lpNorm<Eigen::Infinity>() <= tol * 1e-2) break;

    // Two-loop recursion.
    Eigen::VectorXd d = -g;
    std::vector<double> a(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(d);
      d += (a[i] - b) * s_hist[i];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + step * d;
      f_new = fun(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd g_new(x.size());
    f_new = fun(x_new, &g_new);
    if (!all_finite(g_new)) break;
    ++out.iters;

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > kLbfgsMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const bool small_change = std::abs(f - f_new) <= tol * 1e-3 * std::max(1.0, std::abs(f_new));
    const bool small_step = s.lpNorm<Eigen::Infinity>() <= tol * 1e-3;
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
    out.x = x;
    out.f = f;
    if (small_change || small_step) break;
  }
  return out;
}

Eigen::MatrixXd fd_jacobian(const ConstraintFn& c, const Eigen::VectorXd& x, Eigen::Index m,
                            double h) {
  Eigen::MatrixXd jac(m, x.size());
  Eigen::VectorXd xp = x;
  Eigen::VectorXd xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (c(xp) - c(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

bool slacks_feasible(const Eigen::VectorXd& slacks) {
  for (Eigen::Index i = 0; i < slacks.size(); ++i) {
    if (!(slacks[i] >= -kFeasibilitySlack)) return false;
  }
  return true;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void check_groups(const std::vector<double>& values, int p, const char* what) {
  if (static_cast<int>(values.size()) != p) {
    throw std::invalid_argument(std::string(what) + " needs one entry per group (" +
                                std::to_string(p) + "), got " + std::to_string(values.size()));
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(conv_tol > 0.0)) throw std::invalid_argument("conv_tol must be positive");
  if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
  if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (!(init_box > 0.0)) throw std::invalid_argument("init_box must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive");
  }
}

void RobustParams::validate() const {
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  if (lambda.empty() || lambda.size() != gamma.size()) {
    throw std::invalid_argument("lambda and gamma must be nonempty and of equal length");
  }
  for (std::size_t l = 0; l < lambda.size(); ++l) {
    if (!(lambda[l] > 0.0 && lambda[l] <= 1.0) || !(gamma[l] > 0.0 && gamma[l] <= 1.0)) {
      throw std::invalid_argument("lambda and gamma entries must lie in (0, 1]");
    }
    if (lambda[l] > gamma[l] + 1e-12) {
      throw std::invalid_argument("lambda exceeds gamma for group " + std::to_string(l + 1));
    }
  }
}

double RobustParams::min_lambda() const {
  if (lambda.empty()) throw std::invalid_argument("lambda is empty");
  return *std::min_element(lambda.begin(), lambda.end());
}

SolveResult constrained_minimize(const ConstrainedProblem& problem, const SolverConfig& config) {
  config.validate();
  if (problem.dim < 1) throw std::invalid_argument("problem dimension must be positive");
  if (!problem.objective) throw std::invalid_argument("objective is required");
  const ConstraintFn& slack_fn =
      problem.feasibility_slacks ? problem.feasibility_slacks : problem.constraints;

  const auto dim = static_cast<Eigen::Index>(problem.dim);
  SolveResult result;
  bool any_finite_start = false;
  Eigen::VectorXd last_x;
  double last_f = 0.0;
  std::vector<double> last_slacks;
  int total_iters = 0;

  for (int r = 0; r < config.restarts; ++r) {
    auto rng = make_rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    std::uniform_real_distribution<double> unif(-config.init_box, config.init_box);
    Eigen::VectorXd x(dim);
    for (Eigen::Index j = 0; j < dim; ++j) x[j] = unif(rng);

    if (!std::isfinite(problem.objective(x, nullptr))) continue;
    any_finite_start = true;

    Eigen::Index m = 0;
    if (problem.constraints) m = problem.constraints(x).size();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
    double rho = kInitialPenalty;
    double prev_violation = std::numeric_limits<double>::infinity();
    int budget = config.max_iters;

    bool have_best = false;
    Eigen::VectorXd best_x;
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> best_slacks;

    for (int outer = 0; outer < kMaxOuterIters && budget > 0; ++outer) {
      const SmoothFn lagrangian = [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) {
        double f = problem.objective(t, grad);
        if (m == 0) return f;
        const Eigen::VectorXd c = problem.constraints(t);
        Eigen::VectorXd shifted = (mu - rho * c).cwiseMax(0.0);
        f += (shifted.squaredNorm() - mu.squaredNorm()) / (2.0 * rho);
        if (grad != nullptr) {
          const Eigen::MatrixXd jac = fd_jacobian(problem.constraints, t, m, config.fd_step);
          *grad -= jac.transpose() * shifted;
        }
        return f;
      };

      InnerResult inner = lbfgs(lagrangian, x, budget, config.conv_tol);
      budget -= std::max(inner.iters, 1);
      total_iters += inner.iters;
      const Eigen::VectorXd step = inner.x - x;
      x = inner.x;

      const double f = problem.objective(x, nullptr);
      Eigen::VectorXd slacks = slack_fn ? slack_fn(x) : Eigen::VectorXd();
      last_x = x;
      last_f = f;
      last_slacks = to_std(slacks);
      if (std::isfinite(f) && slacks_feasible(slacks) && f < best_f) {
        have_best = true;
        best_x = x;
        best_f = f;
        best_slacks = last_slacks;
      }

      if (m == 0) break;
      const Eigen::VectorXd c = problem.constraints(x);
      const double violation = std::max(0.0, (-c).maxCoeff());
      mu = (mu - rho * c).cwiseMax(0.0);
      const double complementarity = c.cwiseMin(mu).cwiseAbs().maxCoeff();
      if (violation < config.conv_tol &&
          (complementarity < config.conv_tol || step.lpNorm<Eigen::Infinity>() < config.conv_tol)) {
        break;
      }
      if (violation > 0.25 * prev_violation) rho = std::min(rho * 10.0, kMaxPenalty);
      prev_violation = violation;
    }

    result.restarts_used = r + 1;
    if (have_best) {
      result.classifier = LinearClassifier(best_x, config.use_protected, config.temperature);
      result.feasible = true;
      result.objective = best_f;
      result.constraint_slacks = best_slacks;
      result.iterations = total_iters;
      return result;
    }
  }

  if (!any_finite_start) {
    throw std::runtime_error("objective is not finite at any initial point");
  }
  result.classifier = LinearClassifier(last_x, config.use_protected, config.temperature);
  result.feasible = false;
  result.objective = last_f;
  result.constraint_slacks = last_slacks;
  result.iterations = total_iters;
  return result;
}

SolveResult fit_fairness_program(const Dataset& dataset, const FairnessProgram& program,
                                 const SolverConfig& config) {
  config.validate();
  if (dataset.size() == 0) throw std::invalid_argument("dataset is empty");
  const int p = dataset.num_groups();
  for (const auto& r : program.ratios) r.spec.validate();
  for (const auto& fl : program.floors) {
    fl.spec.validate();
    check_groups(fl.floors, p, "mass floor");
  }
  for (const auto& b : program.boxes) {
    b.spec.validate();
    if (!(b.lower <= b.upper)) throw std::invalid_argument("box lower bound exceeds upper bound");
  }

  const auto make_clf = [&](const Eigen::VectorXd& theta) {
    return LinearClassifier(theta, config.use_protected, config.temperature);
  };

  ConstrainedProblem problem;
  problem.dim = dataset.dim() + (config.use_protected ? 1 : 0);
  problem.objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    LossAndGradient lg = logistic_loss(make_clf(theta), dataset);
    if (grad != nullptr) *grad = std::move(lg.gradient);
    return lg.loss;
  };

  double margin = 0.0;
  const bool constrained =
      !program.ratios.empty() || !program.floors.empty() || !program.boxes.empty();
  if (constrained) {
    // Soft surrogate: ratio constraints as pairwise q_l - t * q_k >= 0 so
    // the constraint is smooth in theta. An undefined q counts as 0.
    problem.constraints = [&, p](const Eigen::VectorXd& theta) {
      const double m = margin;
      const Eigen::VectorXd probs = predict_soft(make_clf(theta), dataset);
      std::vector<double> c;
      for (const auto& r : program.ratios) {
        const PerformanceTable t = soft_group_performance(dataset, probs, r.spec);
        for (int l = 0; l < p; ++l) {
          for (int k = 0; k < p; ++k) {
            if (l == k) continue;
            c.push_back(t.q[l].value_or(0.0) - std::min(1.0, r.threshold + m) * t.q[k].value_or(0.0));
          }
        }
      }
      for (const auto& fl : program.floors) {
        const PerformanceTable t = soft_group_performance(dataset, probs, fl.spec);
        for (int l = 0; l < p; ++l) c.push_back(t.numerators[l] - fl.floors[l] - m);
      }
      for (const auto& b : program.boxes) {
        const PerformanceTable t = soft_group_performance(dataset, probs, b.spec);
        const double mid = 0.5 * (b.lower + b.upper);
        const double lo = std::min(b.lower + m, mid);
        const double hi = std::max(b.upper - m, mid);
        for (int l = 0; l < p; ++l) {
          const double q = t.q[l].value_or(0.0);
          c.push_back(q - lo);
          c.push_back(hi - q);
        }
      }
      return Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())).eval();
    };
    problem.feasibility_slacks = [&, p](const Eigen::VectorXd& theta) {
      const Predictions preds = predict_hard(make_clf(theta), dataset);
      std::vector<double> s;
      for (const auto& r : program.ratios) {
        s.push_back(fairness_value(group_performance(dataset, preds, r.spec)) - r.threshold);
      }
      for (const auto& fl : program.floors) {
        const PerformanceTable t = group_performance(dataset, preds, fl.spec);
        for (int l = 0; l < p; ++l) s.push_back(t.numerators[l] - fl.floors[l]);
      }
      for (const auto& b : program.boxes) {
        const PerformanceTable t = group_performance(dataset, preds, b.spec);
        for (int l = 0; l < p; ++l) {
          const double q = t.q[l].value_or(0.0);
          s.push_back(std::min(q - b.lower, b.upper - q));
        }
      }
      return Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())).eval();
    };
  }
  if (!constrained) return constrained_minimize(problem, config);

  // The soft surrogate can be met exactly while the hard indicators fall
  // short. When that happens, re-solve with every soft target raised by the
  // observed hard shortfall.
  SolveResult res = constrained_minimize(problem, config);
  for (int round = 0; round < kTighteningRounds && !res.feasible; ++round) {
    double shortfall = 0.0;
    for (double v : res.constraint_slacks) shortfall = std::max(shortfall, -v);
    if (!(shortfall > 0.0) || !std::isfinite(shortfall)) break;
    margin += shortfall + kTighteningPad;
    res = constrained_minimize(problem, config);
  }
  return res;
}

SolveResult fit_unconstrained(const Dataset& dataset, const SolverConfig& config) {
  return fit_fairness_program(dataset, FairnessProgram{}, config);
}

SolveResult fit_target_fair(const Dataset& dataset, const MetricSpec& spec, double tau,
                            const SolverConfig& config) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  FairnessProgram program;
  program.ratios.push_back({spec, tau});
  SolveResult res = fit_fairness_program(dataset, program, config);
  res.fairness_threshold = tau;
  return res;
}

double robust_fairness_threshold(const RobustParams& params) {
  params.validate();
  const double x = (params.eta + params.delta) / params.min_lambda();
  if (!(x < 1.0)) {
    throw std::invalid_argument("assumption violated: min lambda must exceed eta + delta");
  }
  const double r = (1.0 - x) / (1.0 + x);
  return params.tau * r * r;
}

int default_scaling_resolution(int num_groups) {
  if (num_groups <= 2) return 2000;
  constexpr double kMaxPoints = 2e6;
  int res = 4;
  for (int r = 5; r <= 2000; ++r) {
    // Grid points on the full simplex: C(r + p, p).
    double count = 1.0;
    for (int i = 1; i <= num_groups; ++i) count = count * (r + i) / i;
    if (count > kMaxPoints) break;
    res = r;
  }
  return res;
}

double scaling_objective(const RobustParams& params, const std::vector<double>& etas) {
  const std::size_t p = params.lambda.size();
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < p; ++l) {
    for (std::size_t k = 0; k < p; ++k) {
      const double d1 = 1.0 + (etas[k] - etas[l]) / params.gamma[l];
      const double d2 = 1.0 + etas[l] / params.lambda[k];
      // A nonpositive denominator means the bound has broken down entirely.
      if (!(d1 > 0.0) || !(d2 > 0.0)) return 0.0;
      const double term = ((1.0 - etas[l] / params.lambda[l]) / d1) *
                          ((1.0 + (etas[l] - etas[k]) / params.gamma[k]) / d2);
      worst = std::min(worst, term);
    }
  }
  return worst;
}

double compute_scaling_s(const RobustParams& params, int grid_resolution) {
  params.validate();
  if (grid_resolution < 1) throw std::invalid_argument("grid resolution must be positive");
  const double budget = params.eta + params.delta;
  if (!(budget < params.min_lambda())) {
    throw std::invalid_argument("assumption violated: min lambda must exceed eta + delta");
  }
  if (budget == 0.0) return 1.0;

  const std::size_t p = params.lambda.size();
  const double h = budget / grid_resolution;
  std::vector<double> etas(p, 0.0);
  std::vector<double> best_etas = etas;
  double best = std::numeric_limits<double>::infinity();

  // Every integer vector k >= 0 with sum k <= R, scaled by h.
  std::vector<int> k(p, 0);
  const auto visit = [&](auto&& self, std::size_t idx, int remaining) -> void {
    if (idx == p) {
      for (std::size_t i = 0; i < p; ++i) etas[i] = k[i] * h;
      const double v = scaling_objective(params, etas);
      if (v < best) {
        best = v;
        best_etas = etas;
      }
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      k[idx] = v;
      self(self, idx + 1, remaining - v);
    }
    k[idx] = 0;
  };
  visit(visit, 0, grid_resolution);

  // Pattern-search polish: single-coordinate moves and pairwise transfers.
  const auto feasible = [&](const std::vector<double>& e) {
    double sum = 0.0;
    for (double v : e) {
      if (v < 0.0) return false;
      sum += v;
    }
    return sum <= budget * (1.0 + 1e-12);
  };
  for (double step = h; step > budget * 1e-12; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t i = 0; i < p && !improved; ++i) {
        for (int sign : {1, -1}) {
          std::vector<double> cand = best_etas;
          cand[i] += sign * step;
          if (!feasible(cand)) continue;
          const double v = scaling_objective(params, cand);
          if (v < best) {
            best = v;
            best_etas = std::move(cand);
            improved = true;
            break;
          }
        }
        for (std::size_t j = 0; j < p && !improved; ++j) {
          if (i == j) continue;
          std::vector<double> cand = best_etas;
          cand[i] += step;
          cand[j] -= step;
          if (!feasible(cand)) continue;
          const double v = scaling_objective(params, cand);
          if (v < best) {
            best = v;
            best_etas = std::move(cand);
            improved = true;
          }
        }
      }
    }
  }
  return std::clamp(best, 0.0, 1.0);
}

SolveResult fit_err_tolerant(const Dataset& perturbed, const MetricSpec& spec,
                             const RobustParams& params, const SolverConfig& config) {
  return fit_general_err_tolerant(perturbed, {spec}, params, config);
}

SolveResult fit_err_tolerant_plus(const Dataset& perturbed, const MetricSpec& spec,
                                  const RobustParams& params, const SolverConfig& config) {
  params.validate();
  check_groups(params.lambda, perturbed.num_groups(), "lambda");
  const double s = compute_scaling_s(params, default_scaling_resolution(perturbed.num_groups()));
  const double threshold = params.tau * s;

  FairnessProgram program;
  program.ratios.push_back({spec, threshold});
  MassFloor floor{spec, {}};
  for (double l : params.lambda) floor.floors.push_back(l - params.eta - params.delta);
  program.floors.push_back(std::move(floor));
  SolveResult res = fit_fairness_program(perturbed, program, config);
  res.fairness_threshold = threshold;
  return res;
}

SolveResult fit_general_err_tolerant(const Dataset& perturbed, const std::vector<MetricSpec>& specs,
                                     const RobustParams& params, const SolverConfig& config) {
  if (specs.empty()) throw std::invalid_argument("at least one metric is required");
  check_groups(params.lambda, perturbed.num_groups(), "lambda");
  const double threshold = robust_fairness_threshold(params);
  const double floor_value = params.min_lambda() - params.eta - params.delta;

  FairnessProgram program;
  for (const auto& spec : specs) {
    program.ratios.push_back({spec, threshold});
    program.floors.push_back(
        {spec, std::vector<double>(static_cast<std::size_t>(perturbed.num_groups()), floor_value)});
  }
  SolveResult res = fit_fairness_program(perturbed, program, config);
  res.fairness_threshold = threshold;
  return res;
}

RobustParams heuristic_params(const Dataset& perturbed, const std::vector<MetricSpec>& specs,
                              double eta, double tau, double delta, LambdaHeuristic heuristic) {
  if (specs.empty()) throw std::invalid_argument("at least one metric is required");
  const auto p = static_cast<std::size_t>(perturbed.num_groups());
  RobustParams params;
  params.eta = eta;
  params.tau = tau;
  params.delta = delta;
  params.lambda.assign(p, std::numeric_limits<double>::infinity());
  params.gamma.assign(p, std::numeric_limits<double>::infinity());

  for (const auto& spec : specs) {
    const PerformanceTable t = group_performance(perturbed, perturbed.labels(), spec);
    std::vector<double> lam = t.denominators;
    if (heuristic == LambdaHeuristic::kLabelPlugIn) {
      lam = t.numerators;
      // Metrics whose event contradicts its conditioning under perfect
      // predictions (FPR, FDR) have zero plug-in mass; use the conditioning
      // mass for them.
      const bool structurally_zero =
          std::all_of(lam.begin(), lam.end(), [](double v) { return v == 0.0; });
      if (structurally_zero) {
        lam = t.denominators;
      } else {
        // A group whose mass does not clear eta + delta gets the limiting
        // program: threshold and floor both go to zero as lambda -> eta + delta.
        for (double& v : lam) v = std::max(v, eta + delta + kBoundaryPad);
      }
    }
    for (std::size_t l = 0; l < p; ++l) {
      params.lambda[l] = std::min(params.lambda[l], lam[l]);
      params.gamma[l] = std::min(params.gamma[l], t.denominators[l]);
    }
  }
  for (std::size_t l = 0; l < p; ++l) params.lambda[l] = std::min(params.lambda[l], params.gamma[l]);
  return params;
}

}  // namespace fairguard
