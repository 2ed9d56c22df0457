#pragma once

#include "fairguard/adversaries.hpp"
#include "fairguard/dataset.hpp"
#include "fairguard/finite_distribution.hpp"
#include "fairguard/metrics.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fairguard {

/// A deterministic classifier over the (x, z) cells of a finite domain.
struct EnumClassifier {
  std::vector<int> outputs;  ///< indexed by FiniteDistribution::cell_index
  int num_groups = 2;

  int operator()(int x, int z) const {
    return outputs[static_cast<std::size_t>(x * num_groups + (z - 1))];
  }
  /// Classifier number `code` of the 2^cells enumeration (bit i = cell i).
  static EnumClassifier from_code(std::uint64_t code, int num_cells, int num_groups);
  std::uint64_t code() const;
  /// Human-readable assignment, e.g. "A1=1 A2=0 B1=0 ...".
  std::string describe(const FiniteDistribution& dist) const;
};

using DistributionTriple = std::array<FiniteDistribution, 3>;

/// Three 6-point distributions over {A,B,C} x {1,2} with Y = 1[X = A].
DistributionTriple build_family_a(double c, double alpha);
/// Three 10-point distributions over {A,...,E} x {1,2} with Y = 1[X != E].
DistributionTriple build_family_b(double lambda, double c);
/// P and Q over {A,B,C} x {1,2}: identical (X,Z) marginals, labels differing
/// on the A and C cells.
std::pair<FiniteDistribution, FiniteDistribution> build_family_c(double eta);

/// Same domain and labels as `dist`, with masses replaced (point order kept).
FiniteDistribution with_masses(const FiniteDistribution& dist, std::vector<double> mass);

struct ExactMetrics {
  double err = 0.0;
  double omega = 0.0;
};

PerformanceTable exact_performance(const FiniteDistribution& dist, const EnumClassifier& clf,
                                   const MetricSpec& spec);
ExactMetrics exact_metrics(const FiniteDistribution& dist, const EnumClassifier& clf,
                           const MetricSpec& spec);

/// Tolerance for the exact comparisons below: equalities and non-strict
/// bounds accept values within it; strict bounds must clear it.
inline constexpr double kExactSlack = 1e-12;

enum class Comparison { kLess, kLessEqual, kGreater, kGreaterEqual, kEqual };

struct Bound {
  Comparison cmp = Comparison::kLess;
  double value = 0.0;
  bool holds(double v) const;
  std::string describe() const;
};

struct Counterexample {
  EnumClassifier classifier;
  std::vector<ExactMetrics> per_distribution;
};

struct NoGoodReport {
  std::string family;
  double err_bound = 0.0;
  double omega_bound = 0.0;
  std::size_t classifiers_checked = 0;
  std::vector<Counterexample> counterexamples;
  /// max over classifiers with err < err_bound on every distribution of
  /// min_k Omega_k; empty when no classifier meets the error bound.
  std::optional<double> tight_omega;
  bool passed() const { return counterexamples.empty(); }
};

/// Enumerates every classifier and reports those that have err < err_bound
/// and Omega >= omega_bound on all distributions simultaneously.
NoGoodReport verify_no_good_classifier(std::span<const FiniteDistribution> dists,
                                       const MetricSpec& spec, double err_bound,
                                       double omega_bound, std::string family);

/// (c(1 - alpha), c + alpha).
std::pair<double, double> family_a_no_good_bounds(double c, double alpha);
/// (1/2 - lambda - c/2, 1 - c(1 - 4 lambda)/(2 lambda) + 3c^2/(4 lambda^2)).
std::pair<double, double> family_b_no_good_bounds(double lambda, double c);

struct WitnessCriterion {
  Bound err;
  Bound omega;
};

/// err < c*alpha/2 (or <= when not strict) and Omega > 1 - alpha.
WitnessCriterion family_a_witness_criterion(double c, double alpha, bool strict = true);
/// err <= 3c/2 and Omega = 1.
WitnessCriterion family_b_witness_criterion(double c);
/// err = 0 and Omega = 1.
WitnessCriterion family_c_witness_criterion();

struct DistributionWitness {
  std::string distribution;
  std::size_t witnesses = 0;
  std::optional<EnumClassifier> first;
  std::optional<ExactMetrics> first_metrics;
  /// Lowest error among classifiers meeting the Omega bound alone.
  std::optional<double> best_err_at_omega;
};

struct WitnessReport {
  std::string family;
  WitnessCriterion criterion;
  std::vector<DistributionWitness> per_distribution;
  bool passed() const;
};

WitnessReport verify_good_classifier_exists(std::span<const FiniteDistribution> dists,
                                            const MetricSpec& spec,
                                            const WitnessCriterion& criterion,
                                            std::string family);

struct CrossCheckReport {
  double eta = 0.0;
  std::size_t classifiers_checked = 0;
  double min_error_sum = 0.0;
  std::vector<EnumClassifier> violators;  ///< Err_P + Err_Q < 2 eta
  bool passed() const { return violators.empty(); }
};

/// Every classifier must have Err_P + Err_Q >= 2 eta.
CrossCheckReport verify_family_c_error_sum(const FiniteDistribution& p,
                                           const FiniteDistribution& q, double eta);

/// n iid draws; each symbol becomes a one-hot feature vector over x_ids.
Dataset sample_from(const FiniteDistribution& dist, std::size_t n, std::uint64_t seed);

/// Mixing adversary on family C: samples at symbol `kept_symbol` keep their
/// group; every other sample switches group with probability 1/2. Returns
/// the input unchanged (budget_exceeded) when the flips exceed eta*N.
PerturbationRecord perturb_half_flip(const Dataset& dataset, int kept_symbol, double eta,
                                     std::uint64_t seed);

/// Largest |empirical - exact| over every (x, z, y) of `dist`'s grid.
double max_joint_deviation(const Dataset& onehot, const FiniteDistribution& dist);

struct TheoryParams {
  double family_a_c = 0.3;
  double family_a_alpha = 0.1;
  double family_b_lambda = 0.2;
  double family_b_c = 0.04;
  double family_c_eta = 0.2;
  bool strict_family_a_witness = true;

  double coupling_eta = 0.1;
  std::size_t coupling_budget_n = 5000;
  int coupling_budget_trials = 200;
  double coupling_budget_rate = 0.95;
  std::size_t coupling_freq_n = 20000;
  double coupling_freq_tol = 0.01;
  int coupling_replicates = 50;
  std::uint64_t seed = 0;

  /// Replacement mass tables keyed "A1".."A3", "B1".."B3", "CP", "CQ".
  std::map<std::string, std::vector<double>> mass_overrides;
};

TheoryParams theory_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TheoryParams& params);

struct CouplingReport {
  double eta = 0.0;
  std::size_t n_budget = 0;
  int trials = 0;
  int within_budget = 0;
  double success_rate = 0.0;
  std::size_t n_freq = 0;
  std::uint64_t freq_seed = 0;
  bool freq_success = false;
  double max_deviation = 0.0;
  bool passed = false;
  /// Extra independent frequency draws, reported but not part of `passed`.
  int replicates = 0;
  int replicate_exceedances = 0;
  double replicate_mean_deviation = 0.0;
};

CouplingReport check_coupling(const FiniteDistribution& source, const FiniteDistribution& target,
                              const TheoryParams& params);

struct MixingReport {
  double eta = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double max_deviation = 0.0;  ///< vs. the closed form eta/4 on the A cells
  bool passed = false;
};

MixingReport check_family_c_mixing(const FiniteDistribution& p, const TheoryParams& params);

struct NamedCheck {
  std::string name;
  bool passed = false;
  /// Informational checks are reported but do not decide the overall verdict.
  bool gating = true;
  nlohmann::json detail;
};

struct TheoryReport {
  std::vector<NamedCheck> checks;
  bool passed() const;
  const NamedCheck& check(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Runs every verifier with `params` and collects the results.
TheoryReport verify_all(const TheoryParams& params);

}  // namespace fairguard
