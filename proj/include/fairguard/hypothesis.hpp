#pragma once

#include "fairguard/dataset.hpp"

#include <Eigen/Dense>

namespace fairguard {

/// Linear classifier f(x) = 1[<x, theta> >= 0].
///
/// With `use_protected`, theta carries one extra trailing coefficient and the
/// group code is appended to x as a real feature. `temperature` only affects
/// the soft prediction sigmoid(<x, theta> / temperature).
struct LinearClassifier {
  Eigen::VectorXd theta;
  bool use_protected = false;
  double temperature = 1.0;

  LinearClassifier() = default;
  explicit LinearClassifier(Eigen::VectorXd t, bool protected_feature = false, double temp = 1.0);

  int input_dim() const { return static_cast<int>(theta.size()) - (use_protected ? 1 : 0); }
  void validate() const;

  double margin(const Sample& sample) const;
  /// Inner products for every row of the dataset.
  Eigen::VectorXd margins(const Dataset& dataset) const;
};

int predict_hard(const LinearClassifier& clf, const Sample& sample);
double predict_soft(const LinearClassifier& clf, const Sample& sample);

Predictions predict_hard(const LinearClassifier& clf, const Dataset& dataset);
Eigen::VectorXd predict_soft(const LinearClassifier& clf, const Dataset& dataset);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean negative log-likelihood with sigmoid probabilities clamped to
/// [1e-12, 1 - 1e-12]. The gradient is exact for that clamped function.
LossAndGradient logistic_loss(const LinearClassifier& clf, const Dataset& dataset);

double sigmoid(double t);

}  // namespace fairguard
