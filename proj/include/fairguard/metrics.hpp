#pragma once

#include "fairguard/dataset.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fairguard {

/// A linear-fractional performance metric q_l = Pr[E | E', Z = l]. Both events
/// are boolean tables over (prediction, label), indexed `2 * pred + label`.
struct MetricSpec {
  std::array<bool, 4> e_mask{};
  std::array<bool, 4> e_prime_mask{};
  std::string name;

  bool event(int pred, int label) const { return e_mask[2 * pred + label]; }
  bool conditioning(int pred, int label) const { return e_prime_mask[2 * pred + label]; }
  bool joint(int pred, int label) const { return event(pred, label) && conditioning(pred, label); }
  /// True when E' does not depend on the prediction.
  bool conditioning_is_label_only() const;

  void validate() const;

  static MetricSpec statistical_rate();
  static MetricSpec false_positive_rate();
  static MetricSpec true_positive_rate();
  static MetricSpec false_discovery_rate();
  /// Accepts "sr", "fpr", "tpr", "fdr" (case-insensitive).
  static MetricSpec from_name(const std::string& name);
};

/// Per-group performance. An entry of `q` is empty when its denominator is 0.
struct PerformanceTable {
  std::vector<std::optional<double>> q;
  std::vector<double> numerators;
  std::vector<double> denominators;
};

double empirical_error(const Dataset& dataset, const Predictions& predictions);

/// (1/N) * #{i : E(pred_i, y_i) and E'(pred_i, y_i) and z_i = group}.
double joint_event_mass(const Dataset& dataset, const Predictions& predictions,
                        const MetricSpec& spec, int group);

PerformanceTable group_performance(const Dataset& dataset, const Predictions& predictions,
                                   const MetricSpec& spec);

/// Expected-indicator version of `group_performance`: sample i is predicted
/// positive with probability `probabilities[i]`. Used for smoothed constraints.
PerformanceTable soft_group_performance(const Dataset& dataset,
                                        const Eigen::VectorXd& probabilities,
                                        const MetricSpec& spec);

/// min_l q_l / max_l q_l with the zero-denominator conventions:
///  - all entries undefined -> 1
///  - some undefined: 1 if every defined entry is 0, else 0
///  - max of defined entries 0 -> 1
double fairness_value(const PerformanceTable& table);

/// Omega(clean) / Omega(perturbed); a classifier is s-stable when this lies in
/// [s, 1/s]. Returns 1 when both are 0 and +inf when only the denominator is.
double stability_ratio(double omega_clean, double omega_perturbed);

}  // namespace fairguard
