#include "fairguard/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <stdexcept>

namespace fairguard {
namespace {

void check_lengths(const Dataset& dataset, std::size_t n) {
  if (n != dataset.size()) {
    throw std::invalid_argument("predictions length " + std::to_string(n) +
                                " does not match dataset size " + std::to_string(dataset.size()));
  }
}

void check_binary(const Predictions& predictions) {
  for (int p : predictions) {
    if (p != 0 && p != 1) throw std::invalid_argument("predictions must be 0 or 1");
  }
}

// Index into the (pred, label) masks.
constexpr int cell(int pred, int label) { return 2 * pred + label; }

}  // namespace

bool MetricSpec::conditioning_is_label_only() const {
  return e_prime_mask[cell(0, 0)] == e_prime_mask[cell(1, 0)] &&
         e_prime_mask[cell(0, 1)] == e_prime_mask[cell(1, 1)];
}

void MetricSpec::validate() const {
  if (std::none_of(e_prime_mask.begin(), e_prime_mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("metric '" + name + "': conditioning event E' is never true");
  }
}

MetricSpec MetricSpec::statistical_rate() {
  // E: pred = 1, E': always.
  return {{false, false, true, true}, {true, true, true, true}, "sr"};
}

MetricSpec MetricSpec::false_positive_rate() {
  // E: pred = 1, E': label = 0.
  return {{false, false, true, true}, {true, false, true, false}, "fpr"};
}

MetricSpec MetricSpec::true_positive_rate() {
  // E: pred = 1, E': label = 1.
  return {{false, false, true, true}, {false, true, false, true}, "tpr"};
}

MetricSpec MetricSpec::false_discovery_rate() {
  // E: label = 0, E': pred = 1.
  return {{true, false, true, false}, {false, false, true, true}, "fdr"};
}

MetricSpec MetricSpec::from_name(const std::string& name) {
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "sr") return statistical_rate();
  if (key == "fpr") return false_positive_rate();
  if (key == "tpr") return true_positive_rate();
  if (key == "fdr") return false_discovery_rate();
  throw std::invalid_argument("unknown metric '" + name + "' (expected sr, fpr, tpr or fdr)");
}

double empirical_error(const Dataset& dataset, const Predictions& predictions) {
  check_lengths(dataset, predictions.size());
  check_binary(predictions);
  std::size_t mistakes = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] != dataset.label(i)) ++mistakes;
  }
  return static_cast<double>(mistakes) / static_cast<double>(dataset.size());
}

double joint_event_mass(const Dataset& dataset, const Predictions& predictions,
                        const MetricSpec& spec, int group) {
  check_lengths(dataset, predictions.size());
  check_binary(predictions);
  if (group < 1 || group > dataset.num_groups()) {
    throw std::invalid_argument("group " + std::to_string(group) + " outside [1, " +
                                std::to_string(dataset.num_groups()) + "]");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (dataset.group(i) == group && spec.joint(predictions[i], dataset.label(i))) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(dataset.size());
}

PerformanceTable group_performance(const Dataset& dataset, const Predictions& predictions,
                                   const MetricSpec& spec) {
  check_lengths(dataset, predictions.size());
  check_binary(predictions);
  const auto p = static_cast<std::size_t>(dataset.num_groups());
  std::vector<std::size_t> num(p, 0);
  std::vector<std::size_t> den(p, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto g = static_cast<std::size_t>(dataset.group(i) - 1);
    const int pred = predictions[i];
    const int y = dataset.label(i);
    if (spec.conditioning(pred, y)) {
      ++den[g];
      if (spec.event(pred, y)) ++num[g];
    }
  }
  const auto n = static_cast<double>(dataset.size());
  PerformanceTable table;
  table.q.resize(p);
  table.numerators.resize(p);
  table.denominators.resize(p);
  for (std::size_t g = 0; g < p; ++g) {
    table.numerators[g] = static_cast<double>(num[g]) / n;
    table.denominators[g] = static_cast<double>(den[g]) / n;
    if (den[g] > 0) table.q[g] = static_cast<double>(num[g]) / static_cast<double>(den[g]);
  }
  return table;
}

PerformanceTable soft_group_performance(const Dataset& dataset,
                                        const Eigen::VectorXd& probabilities,
                                        const MetricSpec& spec) {
  check_lengths(dataset, static_cast<std::size_t>(probabilities.size()));
  const auto p = static_cast<std::size_t>(dataset.num_groups());
  std::vector<double> num(p, 0.0);
  std::vector<double> den(p, 0.0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto g = static_cast<std::size_t>(dataset.group(i) - 1);
    const double pos = probabilities[static_cast<Eigen::Index>(i)];
    const double neg = 1.0 - pos;
    const int y = dataset.label(i);
    den[g] += (spec.conditioning(1, y) ? pos : 0.0) + (spec.conditioning(0, y) ? neg : 0.0);
    num[g] += (spec.joint(1, y) ? pos : 0.0) + (spec.joint(0, y) ? neg : 0.0);
  }
  const auto n = static_cast<double>(dataset.size());
  PerformanceTable table;
  table.q.resize(p);
  table.numerators.resize(p);
  table.denominators.resize(p);
  for (std::size_t g = 0; g < p; ++g) {
    table.numerators[g] = num[g] / n;
    table.denominators[g] = den[g] / n;
    if (den[g] > 0.0) table.q[g] = num[g] / den[g];
  }
  return table;
}

double fairness_value(const PerformanceTable& table) {
  bool any_undefined = false;
  bool any_defined = false;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& q : table.q) {
    if (!q) {
      any_undefined = true;
      continue;
    }
    any_defined = true;
    lo = std::min(lo, *q);
    hi = std::max(hi, *q);
  }
  if (!any_defined) return 1.0;
  if (hi == 0.0) return 1.0;
  if (any_undefined) return 0.0;
  return lo / hi;
}

double stability_ratio(double omega_clean, double omega_perturbed) {
  if (omega_perturbed == 0.0) {
    return omega_clean == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return omega_clean / omega_perturbed;
}

}  // namespace fairguard
