#pragma once

#include "fairguard/dataset.hpp"
#include "fairguard/finite_distribution.hpp"
#include "fairguard/hypothesis.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fairguard {

/// Output of an adversary. `flip_mask[i]` marks every sample the adversary
/// altered (its group for attribute adversaries, its label for the nasty one).
struct PerturbationRecord {
  Dataset perturbed;
  std::vector<bool> flip_mask;
  double budget_eta = 0.0;
  std::string kind;
  std::uint64_t rng_seed = 0;
  /// Largest number of alterations the adversary was allowed.
  std::size_t budget = 0;
  /// Set when a randomized adversary overran its budget and returned the input.
  bool budget_exceeded = false;

  std::size_t flips() const;
};

/// Row-stochastic p x p matrix; entry (l, k) is the fraction of group l moved to k.
class FlipMatrix {
 public:
  explicit FlipMatrix(Eigen::MatrixXd p);
  const Eigen::MatrixXd& matrix() const { return p_; }
  int num_groups() const { return static_cast<int>(p_.rows()); }
  /// max_l sum_{k != l} P(l, k).
  double off_diagonal_budget() const;

 private:
  Eigen::MatrixXd p_;
};

/// ceil(eta * n), robust to representation error in eta * n.
std::size_t budget_count(double eta, std::size_t n);

enum class TargetOutcome { kTrueNegative, kFalseNegative, kFalsePositive };

std::string to_string(TargetOutcome outcome);

/// Flips the group of the ceil(eta*N) samples in `source_group` whose outcome
/// under f* matches `outcome` and that lie furthest from f*'s decision
/// boundary; ties go to the lower index. If fewer samples qualify, all of
/// them are flipped and the shortfall shows in `flips() < budget`.
PerturbationRecord perturb_targeted(const Dataset& dataset, double eta, TargetOutcome outcome,
                                    const LinearClassifier& fstar, int source_group,
                                    int target_group, std::uint64_t seed);

/// Two-group stochastic flipping: a group-l sample moves to the other group
/// independently with probability rates[l-1].
PerturbationRecord perturb_flip(const Dataset& dataset, const std::vector<double>& rates,
                                std::uint64_t seed);

/// Moves exactly floor(P(l,k) * |G_l|) uniformly chosen group-l samples to k.
PerturbationRecord perturb_p_restricted(const Dataset& dataset, const FlipMatrix& flips,
                                        std::uint64_t seed);

/// Coupling adversary that makes iid draws of `source` look like iid draws of
/// `target`. Each sample keeps its group with probability
/// min(Q(x,z) / P(x,z), 1) and otherwise switches to the other group. If the
/// flip count reaches eta*N the original dataset is returned unchanged with
/// `budget_exceeded` set.
///
/// The dataset must be one-hot encoded over the distributions' symbol table
/// (as produced by `sample_from`), with two groups.
PerturbationRecord perturb_tv_coupling(const Dataset& dataset, const FiniteDistribution& source,
                                       const FiniteDistribution& target, double eta,
                                       std::uint64_t seed);

/// Label attack: flips the labels of the ceil(eta*N) samples f* classifies
/// correctly with the largest margin.
PerturbationRecord perturb_nasty_labels(const Dataset& dataset, double eta,
                                        const LinearClassifier& fstar, std::uint64_t seed);

/// Symbol index of a one-hot feature row; throws if the row is not one-hot.
int one_hot_index(const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace fairguard
