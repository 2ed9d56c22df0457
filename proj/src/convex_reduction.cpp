#include "fairguard/convex_reduction.hpp"

#include "fairguard/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fairguard {
namespace {

constexpr double kSetSlack = 1e-12;
// Temperature multiplier for the second solve of each box.
constexpr double kSharpTemperature = 0.1;

}  // namespace

IntervalPartition partition_intervals(double tau, double alpha) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  IntervalPartition part;
  part.tau = tau;
  part.alpha = alpha;
  part.J = std::max(1, static_cast<int>(std::ceil(tau / alpha - 1e-9)));
  for (int j = 1; j <= part.J; ++j) {
    part.lows.push_back((j - 1) * alpha);
    part.highs.push_back(j * alpha / tau);
  }
  return part;
}

bool in_relaxed_fair_set(const std::vector<double>& q, double tau, double alpha) {
  if (q.empty()) return true;
  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  return *lo >= tau * *hi - alpha - kSetSlack;
}

bool in_box(const std::vector<double>& q, double low, double high) {
  return std::all_of(q.begin(), q.end(), [&](double v) {
    return v >= low - kSetSlack && v <= high + kSetSlack;
  });
}

ReducedResult fit_reduced(const Dataset& perturbed, const MetricSpec& spec,
                          const RobustParams& params, double alpha, const SolverConfig& config) {
  const double tau_robust = robust_fairness_threshold(params);
  if (static_cast<int>(params.lambda.size()) != perturbed.num_groups()) {
    throw std::invalid_argument("lambda needs one entry per group");
  }
  ReducedResult out;
  out.partition = partition_intervals(tau_robust, alpha);
  const double floor_value = params.min_lambda() - params.eta - params.delta;

  double best_error = std::numeric_limits<double>::infinity();
  int best_any = -1;
  double best_any_error = std::numeric_limits<double>::infinity();
  for (int j = 0; j < out.partition.J; ++j) {
    FairnessProgram program;
    program.boxes.push_back({spec, out.partition.lows[j], out.partition.highs[j]});
    program.floors.push_back(
        {spec, std::vector<double>(static_cast<std::size_t>(perturbed.num_groups()), floor_value)});
    // The soft box at the configured temperature can overshoot the hard one
    // on small samples; a sharper second solve competes on hard error.
    SolveResult res;
    double err = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, kSharpTemperature}) {
      SolverConfig c = config;
      c.temperature = config.temperature * scale;
      SolveResult cand = fit_fairness_program(perturbed, program, c);
      const double e = empirical_error(perturbed, predict_hard(cand.classifier, perturbed));
      const bool better = (cand.feasible && !res.feasible) || (cand.feasible == res.feasible && e < err);
      if (better) {
        res = std::move(cand);
        err = e;
      }
    }
    res.fairness_threshold = tau_robust;
    if (res.feasible && err < best_error) {
      best_error = err;
      out.winning_box = j + 1;
    }
    if (err < best_any_error) {
      best_any_error = err;
      best_any = j;
    }
    out.box_results.push_back(std::move(res));
    out.box_errors.push_back(err);
  }
  out.result = out.winning_box > 0 ? out.box_results[out.winning_box - 1] : out.box_results[best_any];
  return out;
}

}  // namespace fairguard
