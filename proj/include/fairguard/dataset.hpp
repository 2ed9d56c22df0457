#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace fairguard {

/// One labeled sample. `group` is 1-indexed in [1, p].
struct Sample {
  Eigen::VectorXd features;
  int label = 0;
  int group = 1;
};

/// Binary predictions, one entry per sample (0 or 1).
using Predictions = std::vector<int>;

/// Column-oriented store of N samples: an N x dim feature matrix, labels in
/// {0,1} and protected-group codes in [1, p].
///
/// Raw data must cover every group (checked at construction). Perturbed
/// copies produced through `with_groups` may empty a group, which is how an
/// adversary can drive a fairness ratio to zero.
class Dataset {
 public:
  enum class Coverage { kRequireAllGroups, kAllowEmptyGroups };

  Dataset() = default;
  Dataset(Eigen::MatrixXd features, std::vector<int> labels, std::vector<int> groups,
          int num_groups, Coverage coverage = Coverage::kRequireAllGroups);

  static Dataset from_samples(const std::vector<Sample>& samples, int num_groups,
                              Coverage coverage = Coverage::kRequireAllGroups);

  std::size_t size() const { return labels_.size(); }
  int dim() const { return static_cast<int>(features_.cols()); }
  int num_groups() const { return num_groups_; }

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& groups() const { return groups_; }

  int label(std::size_t i) const { return labels_[i]; }
  int group(std::size_t i) const { return groups_[i]; }
  Sample sample(std::size_t i) const;

  /// Number of samples carrying each group code; index 0 is group 1.
  std::vector<std::size_t> group_counts() const;
  bool covers_all_groups() const;

  Dataset with_groups(std::vector<int> groups) const;
  Dataset with_labels(std::vector<int> labels) const;
  Dataset subset(std::span<const std::size_t> indices,
                 Coverage coverage = Coverage::kRequireAllGroups) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  void validate(Coverage coverage) const;

  Eigen::MatrixXd features_;
  std::vector<int> labels_;
  std::vector<int> groups_;
  int num_groups_ = 0;
};

}  // namespace fairguard
