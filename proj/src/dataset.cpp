#include "fairguard/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairguard {

Dataset::Dataset(Eigen::MatrixXd features, std::vector<int> labels, std::vector<int> groups,
                 int num_groups, Coverage coverage)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      groups_(std::move(groups)),
      num_groups_(num_groups) {
  validate(coverage);
}

Dataset Dataset::from_samples(const std::vector<Sample>& samples, int num_groups,
                              Coverage coverage) {
  if (samples.empty()) throw std::invalid_argument("dataset must be nonempty");
  const auto dim = samples.front().features.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), dim);
  std::vector<int> y;
  std::vector<int> z;
  y.reserve(samples.size());
  z.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != dim) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has dimension " +
                                  std::to_string(samples[i].features.size()) + ", expected " +
                                  std::to_string(dim));
    }
    x.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
    y.push_back(samples[i].label);
    z.push_back(samples[i].group);
  }
  return Dataset(std::move(x), std::move(y), std::move(z), num_groups, coverage);
}

void Dataset::validate(Coverage coverage) const {
  const auto n = labels_.size();
  if (n == 0) throw std::invalid_argument("dataset must be nonempty");
  if (groups_.size() != n || static_cast<std::size_t>(features_.rows()) != n) {
    throw std::invalid_argument("features, labels and groups must have equal length");
  }
  if (num_groups_ < 1) throw std::invalid_argument("number of groups must be positive");
  if (!features_.allFinite()) throw std::invalid_argument("feature entries must be finite");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels_[i] != 0 && labels_[i] != 1) {
      throw std::invalid_argument("label at row " + std::to_string(i) + " is not in {0,1}");
    }
    if (groups_[i] < 1 || groups_[i] > num_groups_) {
      throw std::invalid_argument("group at row " + std::to_string(i) + " is outside [1, " +
                                  std::to_string(num_groups_) + "]");
    }
  }
  if (coverage == Coverage::kRequireAllGroups && !covers_all_groups()) {
    throw std::invalid_argument("every group in [1, p] must appear at least once");
  }
}

Sample Dataset::sample(std::size_t i) const {
  return Sample{features_.row(static_cast<Eigen::Index>(i)).transpose(), labels_[i], groups_[i]};
}

std::vector<std::size_t> Dataset::group_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_groups_), 0);
  for (int g : groups_) ++counts[static_cast<std::size_t>(g - 1)];
  return counts;
}

bool Dataset::covers_all_groups() const {
  for (auto c : group_counts()) {
    if (c == 0) return false;
  }
  return true;
}

Dataset Dataset::with_groups(std::vector<int> groups) const {
  return Dataset(features_, labels_, std::move(groups), num_groups_, Coverage::kAllowEmptyGroups);
}

Dataset Dataset::with_labels(std::vector<int> labels) const {
  return Dataset(features_, std::move(labels), groups_, num_groups_, Coverage::kAllowEmptyGroups);
}

Dataset Dataset::subset(std::span<const std::size_t> indices, Coverage coverage) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), features_.cols());
  std::vector<int> y;
  std::vector<int> z;
  y.reserve(indices.size());
  z.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto i = indices[r];
    if (i >= size()) throw std::out_of_range("subset index out of range");
    x.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(i));
    y.push_back(labels_[i]);
    z.push_back(groups_[i]);
  }
  return Dataset(std::move(x), std::move(y), std::move(z), num_groups_, coverage);
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.num_groups_ == b.num_groups_ && a.labels_ == b.labels_ && a.groups_ == b.groups_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_;
}

}  // namespace fairguard
