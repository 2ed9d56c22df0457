#pragma once

#include "fairguard/dataset.hpp"
#include "fairguard/metrics.hpp"
#include "fairguard/solver.hpp"

#include <vector>

namespace fairguard {

/// Boxes [L_j, U_j] with L_j = (j-1) * alpha and U_j = j * alpha / tau for
/// j = 1..J, J = ceil(tau / alpha). Every performance vector in K(tau, 0)
/// lies in some box, and every box lies inside K(tau, alpha).
struct IntervalPartition {
  int J = 0;
  std::vector<double> lows;
  std::vector<double> highs;
  double tau = 0.0;
  double alpha = 0.0;
};

IntervalPartition partition_intervals(double tau, double alpha);

/// q in K(tau, alpha): min_l q_l >= tau * max_l q_l - alpha.
bool in_relaxed_fair_set(const std::vector<double>& q, double tau, double alpha);
/// q in P(L, U): L <= q_l <= U for all l.
bool in_box(const std::vector<double>& q, double low, double high);

struct ReducedResult {
  SolveResult result;
  /// 1-based index of the box whose solution won; 0 when every box was infeasible.
  int winning_box = 0;
  IntervalPartition partition;
  /// Solves attempted, in box order.
  std::vector<SolveResult> box_results;
  /// Hard empirical error of each box solution on the training data.
  std::vector<double> box_errors;
};

/// Solves one boxed program per interval of partition_intervals(tau_robust,
/// alpha), each with the error-tolerant mass floors, and keeps the feasible
/// solution with the lowest empirical error (lowest box index on ties).
ReducedResult fit_reduced(const Dataset& perturbed, const MetricSpec& spec,
                          const RobustParams& params, double alpha, const SolverConfig& config);

}  // namespace fairguard
