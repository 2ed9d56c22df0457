#pragma once

#include "fairguard/dataset.hpp"
#include "fairguard/hypothesis.hpp"
#include "fairguard/metrics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace fairguard {

struct SolverConfig {
  int max_iters = 1000;      ///< inner iterations per restart
  double conv_tol = 1e-4;    ///< step / violation / function-change tolerance
  double fd_step = 1e-4;     ///< central-difference step for constraint gradients
  int restarts = 10;         ///< attempts from fresh random starts while infeasible
  double init_box = 1.0;     ///< starts are uniform in [-init_box, init_box]^dim
  double temperature = 1.0;  ///< soft-indicator temperature in smoothed constraints
  std::uint64_t seed = 0;
  bool use_protected = false;

  void validate() const;
};

/// Inputs of the error-tolerant programs. `lambda[l]` lower-bounds the joint
/// event mass of group l under the target classifier and `gamma[l]` its
/// conditioning mass.
struct RobustParams {
  double eta = 0.0;
  double tau = 0.8;
  std::vector<double> lambda;
  std::vector<double> gamma;
  double delta = 0.01;

  void validate() const;
  double min_lambda() const;
};

struct SolveResult {
  LinearClassifier classifier;
  bool feasible = false;
  double objective = 0.0;
  /// Hard-indicator slacks; feasible iff every entry >= -1e-6.
  std::vector<double> constraint_slacks;
  int restarts_used = 0;
  int iterations = 0;
  /// Fairness threshold the program imposed (0 when it had none).
  double fairness_threshold = 0.0;
};

inline constexpr double kFeasibilitySlack = 1e-6;

/// Smooth objective: returns f(theta) and writes its gradient when `grad` is set.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd* grad)>;
/// Vector of constraint values; the constraint set is { theta : c(theta) >= 0 }.
using ConstraintFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct ConstrainedProblem {
  int dim = 0;
  ObjectiveFn objective;
  /// May be empty (unconstrained).
  ConstraintFn constraints;
  /// Slacks used to judge feasibility; defaults to `constraints`.
  ConstraintFn feasibility_slacks;
};

/// Local minimizer: augmented-Lagrangian outer loop around an L-BFGS inner
/// solve, analytic objective gradient, central-difference constraint
/// gradients. Restarts from a fresh uniform start while no feasible iterate
/// has been found. Returns the best feasible iterate, or the last iterate
/// flagged infeasible.
SolveResult constrained_minimize(const ConstrainedProblem& problem, const SolverConfig& config);

/// Smoothed fairness constraints over a dataset. During optimization every
/// indicator uses soft predictions; feasibility uses hard predictions.
struct RatioConstraint {
  MetricSpec spec;
  double threshold = 0.0;  ///< min_l q_l / max_l q_l >= threshold
};
struct MassFloor {
  MetricSpec spec;
  std::vector<double> floors;  ///< Pr[E, E', Z = l] >= floors[l-1]
};
struct BoxConstraint {
  MetricSpec spec;
  double lower = 0.0;  ///< lower <= q_l <= upper for every group
  double upper = 1.0;
};
struct FairnessProgram {
  std::vector<RatioConstraint> ratios;
  std::vector<MassFloor> floors;
  std::vector<BoxConstraint> boxes;
};

/// Minimizes the logistic loss over `dataset` subject to `program`.
SolveResult fit_fairness_program(const Dataset& dataset, const FairnessProgram& program,
                                 const SolverConfig& config);

SolveResult fit_unconstrained(const Dataset& dataset, const SolverConfig& config);

/// Loss minimization subject to Omega(f, dataset) >= tau.
SolveResult fit_target_fair(const Dataset& dataset, const MetricSpec& spec, double tau,
                            const SolverConfig& config);

/// tau * ((1 - x) / (1 + x))^2 with x = (eta + delta) / min_l lambda_l.
double robust_fairness_threshold(const RobustParams& params);

/// Grid resolution used by the error-tolerant+ fit for p groups.
int default_scaling_resolution(int num_groups);

/// Worst-case deflation s of the fairness ratio over per-group perturbation
/// budgets eta_1..eta_p >= 0 with sum <= eta + delta: exhaustive grid at step
/// (eta + delta) / grid_resolution, then a pattern-search polish.
double compute_scaling_s(const RobustParams& params, int grid_resolution);

/// The scaling program's objective at one budget split `etas`.
double scaling_objective(const RobustParams& params, const std::vector<double>& etas);

SolveResult fit_err_tolerant(const Dataset& perturbed, const MetricSpec& spec,
                             const RobustParams& params, const SolverConfig& config);

SolveResult fit_err_tolerant_plus(const Dataset& perturbed, const MetricSpec& spec,
                                  const RobustParams& params, const SolverConfig& config);

SolveResult fit_general_err_tolerant(const Dataset& perturbed, const std::vector<MetricSpec>& specs,
                                     const RobustParams& params, const SolverConfig& config);

enum class LambdaHeuristic {
  /// lambda_l = Pr[E(Y), E'(Y), Z = l], gamma_l = Pr[E'(Y), Z = l]: the
  /// labels stand in for the target classifier's predictions.
  kLabelPlugIn,
  /// lambda_l = gamma_l = Pr[E'(Y), Z = l].
  kConditioningMass,
};

/// Per-group lambda/gamma estimated from the (perturbed) training data. With
/// several specs the element-wise minimum over specs is used.
RobustParams heuristic_params(const Dataset& perturbed, const std::vector<MetricSpec>& specs,
                              double eta, double tau, double delta,
                              LambdaHeuristic heuristic = LambdaHeuristic::kLabelPlugIn);

}  // namespace fairguard
