#include "fairguard/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fairguard {
namespace {

constexpr double kProbClamp = 1e-12;

void check_dim(const LinearClassifier& clf, Eigen::Index dim) {
  if (clf.input_dim() != dim) {
    throw std::invalid_argument("classifier expects " + std::to_string(clf.input_dim()) +
                                " features, got " + std::to_string(dim));
  }
}

}  // namespace

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

LinearClassifier::LinearClassifier(Eigen::VectorXd t, bool protected_feature, double temp)
    : theta(std::move(t)), use_protected(protected_feature), temperature(temp) {
  validate();
}

void LinearClassifier::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
  if (theta.size() == 0) throw std::invalid_argument("theta must be nonempty");
  if (!theta.allFinite()) throw std::invalid_argument("theta entries must be finite");
  if (input_dim() < 0) throw std::invalid_argument("theta too short for protected coefficient");
}

double LinearClassifier::margin(const Sample& sample) const {
  check_dim(*this, sample.features.size());
  const auto d = sample.features.size();
  double m = theta.head(d).dot(sample.features);
  if (use_protected) m += theta[d] * static_cast<double>(sample.group);
  return m;
}

Eigen::VectorXd LinearClassifier::margins(const Dataset& dataset) const {
  check_dim(*this, dataset.dim());
  const auto d = static_cast<Eigen::Index>(dataset.dim());
  Eigen::VectorXd m = dataset.features() * theta.head(d);
  if (use_protected) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      m[static_cast<Eigen::Index>(i)] += theta[d] * static_cast<double>(dataset.group(i));
    }
  }
  return m;
}

int predict_hard(const LinearClassifier& clf, const Sample& sample) {
  return clf.margin(sample) >= 0.0 ? 1 : 0;
}

double predict_soft(const LinearClassifier& clf, const Sample& sample) {
  return sigmoid(clf.margin(sample) / clf.temperature);
}

Predictions predict_hard(const LinearClassifier& clf, const Dataset& dataset) {
  const Eigen::VectorXd m = clf.margins(dataset);
  Predictions out(dataset.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[static_cast<Eigen::Index>(i)] >= 0.0;
  return out;
}

Eigen::VectorXd predict_soft(const LinearClassifier& clf, const Dataset& dataset) {
  Eigen::VectorXd m = clf.margins(dataset) / clf.temperature;
  return m.unaryExpr([](double t) { return sigmoid(t); });
}

namespace {
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
}  // namespace

LossAndGradient logistic_loss(const LinearClassifier& clf, const Dataset& dataset) {
  const Eigen::VectorXd m = clf.margins(dataset);
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto d = static_cast<Eigen::Index>(dataset.dim());

  // d loss_i / d margin_i; zero wherever the clamp is active.
  Eigen::VectorXd dm(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = sigmoid(m[i]);
    const bool clamped = s < kProbClamp || s > 1.0 - kProbClamp;
    const int y = dataset.label(static_cast<std::size_t>(i));
    if (clamped) {
      const double pc = std::clamp(s, kProbClamp, 1.0 - kProbClamp);
      total += y == 1 ? -std::log(pc) : -std::log1p(-pc);
    } else {
      // -log sigmoid(+-m) as a softplus, which keeps full precision in the tails.
      total += softplus(y == 1 ? -m[i] : m[i]);
    }
    dm[i] = clamped ? 0.0 : s - static_cast<double>(y);
  }

  LossAndGradient out;
  out.loss = total / static_cast<double>(n);
  out.gradient = Eigen::VectorXd::Zero(clf.theta.size());
  out.gradient.head(d) = dataset.features().transpose() * dm / static_cast<double>(n);
  if (clf.use_protected) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      g += dm[i] * static_cast<double>(dataset.group(static_cast<std::size_t>(i)));
    }
    out.gradient[d] = g / static_cast<double>(n);
  }
  return out;
}

}  // namespace fairguard
