#pragma once

#include <string>
#include <vector>

namespace fairguard {

/// A point (x, z, y) of a finite domain; x indexes the symbol table.
struct DomainPoint {
  int x = 0;
  int z = 1;
  int y = 0;
};

/// Exact probability table over X x {0,1} x [p] with symbolic X.
///
/// Every (x, z) cell of the grid is expected to be listed (possibly with mass
/// 0) so that classifiers over the grid are total.
class FiniteDistribution {
 public:
  FiniteDistribution() = default;
  FiniteDistribution(std::string name, std::vector<std::string> x_ids, int num_groups,
                     std::vector<DomainPoint> points, std::vector<double> mass);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& x_ids() const { return x_ids_; }
  int num_groups() const { return num_groups_; }
  const std::vector<DomainPoint>& points() const { return points_; }
  const std::vector<double>& mass() const { return mass_; }

  /// Number of (x, z) cells; a classifier assigns one bit per cell.
  int num_cells() const { return static_cast<int>(x_ids_.size()) * num_groups_; }
  int cell_index(int x, int z) const { return x * num_groups_ + (z - 1); }

  double xz_mass(int x, int z) const;
  double x_mass(int x) const;
  double z_mass(int z) const;
  double point_mass(int x, int z, int y) const;
  int x_index(const std::string& id) const;

 private:
  void validate() const;

  std::string name_;
  std::vector<std::string> x_ids_;
  int num_groups_ = 2;
  std::vector<DomainPoint> points_;
  std::vector<double> mass_;
};

/// 1/2 * sum |P(x,z,y) - Q(x,z,y)|; both must share the symbol table.
double total_variation(const FiniteDistribution& a, const FiniteDistribution& b);

}  // namespace fairguard
