#pragma once

#include "fairguard/dataset.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fairguard {

/// Two-dimensional Gaussian clusters, one per (group, label).
struct SyntheticConfig {
  std::size_t n = 1000;
  std::vector<double> group_fractions{0.5, 0.5};
  /// cluster_means[g][y] is the mean of group g+1, label y.
  std::vector<std::array<std::array<double, 2>, 2>> cluster_means{
      {{{-2.0, -2.0}, {2.0, 2.0}}},
      {{{-2.5, -2.5}, {2.5, 2.5}}},
  };
  double cluster_cov_scale = 0.25;
  std::vector<double> positive_rates{0.5, 0.4};
  /// Place exactly round(n_l * rate_l) positives in group l instead of
  /// drawing each label independently.
  bool exact_label_counts = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Splits `total` into integer parts proportional to `weights` (largest
/// remainder; ties go to the lower index).
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights);

Dataset generate_synthetic(const SyntheticConfig& cfg);

struct CsvData {
  Dataset dataset;
  std::vector<std::string> feature_names;
  /// group_codes[g-1] is the raw code mapped to group g.
  std::vector<std::string> group_codes;
};

/// Reads a header-first CSV. Every column other than the label and group
/// columns is a numeric feature. Group codes are mapped to 1..p in sorted
/// order (numeric order when every code is a number).
CsvData load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& group_column);

/// Writes features as x1..xd (or `feature_names`), then "label" and "group".
/// Doubles use the shortest representation that round-trips exactly.
void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::vector<std::string>& feature_names = {});

/// Uniformly shuffled split with floor(f * N) training samples. With
/// `stratify`, every (group, label) cell is split in proportion instead.
/// Both parts must contain every group; the uniform split reshuffles up to
/// 100 times before giving up.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed, bool stratify = false);

}  // namespace fairguard
