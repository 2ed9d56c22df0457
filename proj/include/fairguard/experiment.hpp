#pragma once

#include "fairguard/adversaries.hpp"
#include "fairguard/data.hpp"
#include "fairguard/dataset.hpp"
#include "fairguard/metrics.hpp"
#include "fairguard/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairguard {

enum class SolverKind { kUncons, kTargetFair, kErrTolerant, kErrTolerantPlus, kGeneral, kReduced };
enum class AdversaryKind { kNone, kTrueNegative, kFalseNegative, kFalsePositive, kFlip, kPRestricted, kCoupling, kNasty };
enum class DataSource { kSynthetic, kCsv, kFamilyA };

/// CLI spellings: "uncons", "target-fair", "err-tol", "err-tol-plus", "general", "reduced".
SolverKind parse_solver(const std::string& name);
std::string to_string(SolverKind kind);
/// "none", "tn", "fn", "fp", "flip", "prh", "coupling", "nasty".
AdversaryKind parse_adversary(const std::string& name);
std::string to_string(AdversaryKind kind);
/// "label" or "conditioning".
LambdaHeuristic parse_lambda_heuristic(const std::string& name);
std::string to_string(LambdaHeuristic heuristic);

struct ExperimentConfig {
  DataSource source = DataSource::kSynthetic;
  SyntheticConfig synthetic;
  std::string csv_path;
  std::string label_column = "label";
  std::string group_column = "group";
  /// Family A parameters and sample size for DataSource::kFamilyA.
  double family_c = 0.3;
  double family_alpha = 0.1;
  std::size_t family_n = 5000;

  double train_fraction = 0.7;
  /// Split every (group, label) cell proportionally.
  bool stratified_split = true;

  AdversaryKind adversary = AdversaryKind::kTrueNegative;
  int source_group = 1;
  int target_group = 2;
  /// Flip-noise rates per group; empty means (eta, eta).
  std::vector<double> flip_rates;

  SolverKind solver = SolverKind::kErrTolerantPlus;
  std::vector<std::string> metrics{"sr"};
  double tau = 0.8;
  double eta = 0.05;
  double delta = 0.01;
  double alpha = 0.05;
  LambdaHeuristic lambda_heuristic = LambdaHeuristic::kLabelPlugIn;
  std::vector<double> lambda_override;
  std::vector<double> gamma_override;
  SolverConfig solver_config;

  int trials = 20;
  std::uint64_t seed = 0;
  int jobs = 1;
  /// Wall-clock times make reports differ run to run, so they are opt-in.
  bool record_timing = false;

  void validate() const;
  std::vector<MetricSpec> metric_specs() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  double accuracy = 0.0;                 ///< clean test, hard predictions
  std::vector<double> fairness;          ///< clean test, one per metric
  std::vector<double> train_fairness;    ///< perturbed train, one per metric
  bool feasible = false;
  double objective = 0.0;
  int restarts_used = 0;
  double fairness_threshold = 0.0;
  std::vector<double> lambda;
  std::vector<double> gamma;
  std::size_t flips = 0;
  std::size_t flip_budget = 0;
  bool budget_exceeded = false;
  int winning_box = 0;
  /// Clean-test accuracy and fairness of the adversary's target classifier, when one was fit.
  std::optional<double> fstar_accuracy;
  std::vector<double> fstar_fairness;
  std::vector<double> theta;
  double wall_seconds = 0.0;
};

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;      ///< sample standard deviation
  double std_error = 0.0;  ///< sd / sqrt(count)
};

Summary summarize(const std::vector<double>& values);

struct TrialReport {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
  Summary accuracy;
  std::vector<Summary> fairness;  ///< one per metric
  double feasible_rate = 0.0;
  std::size_t failed_trials = 0;

  bool complete() const { return failed_trials == 0; }
  nlohmann::json to_json() const;
};

/// Runs one trial (split, fit f* on clean train if needed, perturb, fit,
/// evaluate on clean test). Errors propagate.
TrialResult run_trial(const ExperimentConfig& cfg, const Dataset& data, int trial);

/// Loads the configured data once and runs every trial, `jobs` at a time.
/// Trial failures are recorded in the report instead of aborting the run.
TrialReport run_experiment(const ExperimentConfig& cfg);

Dataset load_experiment_data(const ExperimentConfig& cfg);

struct SweepGrid {
  std::vector<double> taus;
  std::vector<double> etas;
  /// Fraction of group 1 in synthetic data (two groups).
  std::vector<double> group_fractions;

  bool empty() const { return taus.empty() && etas.empty() && group_fractions.empty(); }
};

struct SweepPoint {
  double tau = 0.0;
  double eta = 0.0;
  std::optional<double> group_fraction;
  TrialReport report;
};

/// One experiment per grid point (cartesian product of the non-empty axes).
std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, const SweepGrid& grid);

/// tau, eta, group_fraction, mean/sd/stderr of accuracy and of each metric, feasible rate.
std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace fairguard
