#pragma once

#include "fairguard/dataset.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fairguard::testing {

// Dataset with one feature column holding `x`.
inline Dataset line_dataset(const std::vector<double>& x, std::vector<int> labels, std::vector<int> groups,
                            int p = 2) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) f(static_cast<Eigen::Index>(i), 0) = x[i];
  return Dataset(f, std::move(labels), std::move(groups), p);
}

// Features are ignored by callers that supply predictions directly.
inline Dataset blank_dataset(std::vector<int> labels, std::vector<int> groups, int p = 2) {
  const std::vector<double> x(labels.size(), 0.0);
  return line_dataset(x, std::move(labels), std::move(groups), p);
}

}  // namespace fairguard::testing
