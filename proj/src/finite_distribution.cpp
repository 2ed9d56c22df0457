#include "fairguard/finite_distribution.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <tuple>

namespace fairguard {

FiniteDistribution::FiniteDistribution(std::string name, std::vector<std::string> x_ids,
                                       int num_groups, std::vector<DomainPoint> points,
                                       std::vector<double> mass)
    : name_(std::move(name)),
      x_ids_(std::move(x_ids)),
      num_groups_(num_groups),
      points_(std::move(points)),
      mass_(std::move(mass)) {
  validate();
}

void FiniteDistribution::validate() const {
  if (x_ids_.empty()) throw std::invalid_argument(name_ + ": empty symbol table");
  if (num_groups_ < 1) throw std::invalid_argument(name_ + ": number of groups must be positive");
  if (points_.size() != mass_.size()) {
    throw std::invalid_argument(name_ + ": points and masses differ in length");
  }
  std::set<std::tuple<int, int, int>> seen;
  double total = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& pt = points_[i];
    if (pt.x < 0 || pt.x >= static_cast<int>(x_ids_.size()) || pt.z < 1 || pt.z > num_groups_ ||
        (pt.y != 0 && pt.y != 1)) {
      throw std::invalid_argument(name_ + ": point " + std::to_string(i) + " outside the domain");
    }
    if (!seen.emplace(pt.x, pt.z, pt.y).second) {
      throw std::invalid_argument(name_ + ": duplicate point " + std::to_string(i));
    }
    if (!(mass_[i] >= 0.0) || !std::isfinite(mass_[i])) {
      throw std::invalid_argument(name_ + ": negative or non-finite mass at point " +
                                  std::to_string(i));
    }
    total += mass_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument(name_ + ": masses sum to " + std::to_string(total) + ", not 1");
  }
}

double FiniteDistribution::xz_mass(int x, int z) const {
  double m = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].x == x && points_[i].z == z) m += mass_[i];
  }
  return m;
}

double FiniteDistribution::x_mass(int x) const {
  double m = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].x == x) m += mass_[i];
  }
  return m;
}

double FiniteDistribution::z_mass(int z) const {
  double m = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].z == z) m += mass_[i];
  }
  return m;
}

double FiniteDistribution::point_mass(int x, int z, int y) const {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].x == x && points_[i].z == z && points_[i].y == y) return mass_[i];
  }
  return 0.0;
}

int FiniteDistribution::x_index(const std::string& id) const {
  for (std::size_t i = 0; i < x_ids_.size(); ++i) {
    if (x_ids_[i] == id) return static_cast<int>(i);
  }
  throw std::invalid_argument(name_ + ": unknown symbol '" + id + "'");
}

double total_variation(const FiniteDistribution& a, const FiniteDistribution& b) {
  if (a.x_ids() != b.x_ids() || a.num_groups() != b.num_groups()) {
    throw std::invalid_argument("total_variation: distributions live on different domains");
  }
  double sum = 0.0;
  const int nx = static_cast<int>(a.x_ids().size());
  for (int x = 0; x < nx; ++x) {
    for (int z = 1; z <= a.num_groups(); ++z) {
      for (int y = 0; y <= 1; ++y) sum += std::abs(a.point_mass(x, z, y) - b.point_mass(x, z, y));
    }
  }
  return 0.5 * sum;
}

}  // namespace fairguard
