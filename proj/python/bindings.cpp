#include "fairguard/adversaries.hpp"
#include "fairguard/data.hpp"
#include "fairguard/experiment.hpp"
#include "fairguard/hypothesis.hpp"
#include "fairguard/metrics.hpp"
#include "fairguard/solver.hpp"
#include "fairguard/theory_lab.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>

namespace py = pybind11;
using namespace fairguard;

namespace {

int group_count(const std::vector<int>& groups, std::optional<int> num_groups) {
  if (num_groups) return *num_groups;
  int p = 0;
  for (int z : groups) p = std::max(p, z);
  return p;
}

Dataset make_dataset(const Eigen::MatrixXd& x, const std::vector<int>& y, const std::vector<int>& z,
                     std::optional<int> num_groups) {
  return Dataset(x, y, z, group_count(z, num_groups), Dataset::Coverage::kAllowEmptyGroups);
}

RobustParams robust_params(double eta, double tau, double delta, const std::vector<double>& lambda,
                           std::optional<std::vector<double>> gamma) {
  RobustParams p;
  p.eta = eta;
  p.tau = tau;
  p.delta = delta;
  p.lambda = lambda;
  p.gamma = gamma ? *gamma : lambda;
  return p;
}

py::dict solve_dict(const SolveResult& r) {
  py::dict d;
  d["theta"] = r.classifier.theta;
  d["use_protected"] = r.classifier.use_protected;
  d["feasible"] = r.feasible;
  d["objective"] = r.objective;
  d["constraint_slacks"] = r.constraint_slacks;
  d["restarts_used"] = r.restarts_used;
  d["fairness_threshold"] = r.fairness_threshold;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of fairguard";

  m.def(
      "generate_synthetic",
      [](std::size_t n, std::vector<double> fractions, std::uint64_t seed) {
        SyntheticConfig cfg;
        cfg.n = n;
        cfg.group_fractions = std::move(fractions);
        cfg.seed = seed;
        const Dataset d = generate_synthetic(cfg);
        return py::make_tuple(d.features(), d.labels(), d.groups());
      },
      py::arg("n") = 1000, py::arg("fractions") = std::vector<double>{0.5, 0.5}, py::arg("seed") = 0,
      "Two-group Gaussian-mixture data as (X, y, z); z is 1-based.");

  m.def(
      "group_performance",
      [](const std::vector<int>& y, const std::vector<int>& z, const std::vector<int>& predictions,
         const std::string& metric, std::optional<int> num_groups) {
        const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), 1);
        const Dataset d = make_dataset(x, y, z, num_groups);
        const PerformanceTable t = group_performance(d, predictions, MetricSpec::from_name(metric));
        py::dict out;
        out["q"] = t.q;
        out["fairness"] = fairness_value(t);
        return out;
      },
      py::arg("y"), py::arg("z"), py::arg("predictions"), py::arg("metric") = "sr",
      py::arg("num_groups") = py::none(), "Per-group performances (None when undefined) and min/max ratio.");

  m.def(
      "predict",
      [](const Eigen::VectorXd& theta, const Eigen::MatrixXd& x, const std::vector<int>& z, bool use_protected) {
        const std::vector<int> y(static_cast<std::size_t>(x.rows()), 0);
        const std::vector<int> groups = z.empty() ? std::vector<int>(y.size(), 1) : z;
        return predict_hard(LinearClassifier(theta, use_protected), make_dataset(x, y, groups, std::nullopt));
      },
      py::arg("theta"), py::arg("x"), py::arg("z") = std::vector<int>{}, py::arg("use_protected") = false);

  m.def(
      "fit",
      [](const Eigen::MatrixXd& x, const std::vector<int>& y, const std::vector<int>& z, const std::string& solver,
         const std::string& metric, double tau, double eta, double delta,
         std::optional<std::vector<double>> lambda, std::uint64_t seed, std::optional<int> num_groups) {
        const Dataset d = make_dataset(x, y, z, num_groups);
        const MetricSpec spec = MetricSpec::from_name(metric);
        SolverConfig cfg;
        cfg.seed = seed;
        const SolverKind kind = parse_solver(solver);
        RobustParams params = heuristic_params(d, {spec}, eta, tau, delta);
        if (lambda) {
          params.lambda = *lambda;
          params.gamma = *lambda;
        }
        switch (kind) {
          case SolverKind::kUncons: return solve_dict(fit_unconstrained(d, cfg));
          case SolverKind::kTargetFair: return solve_dict(fit_target_fair(d, spec, tau, cfg));
          case SolverKind::kErrTolerant: return solve_dict(fit_err_tolerant(d, spec, params, cfg));
          case SolverKind::kErrTolerantPlus: return solve_dict(fit_err_tolerant_plus(d, spec, params, cfg));
          default: throw std::invalid_argument("fit supports uncons, target-fair, err-tol and err-tol-plus");
        }
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("solver") = "err-tol-plus", py::arg("metric") = "sr",
      py::arg("tau") = 0.8, py::arg("eta") = 0.05, py::arg("delta") = 0.01, py::arg("lambda_") = py::none(),
      py::arg("seed") = 0, py::arg("num_groups") = py::none());

  m.def(
      "perturb_true_negatives",
      [](const Eigen::MatrixXd& x, const std::vector<int>& y, const std::vector<int>& z,
         const Eigen::VectorXd& fstar_theta, double eta, int source_group, int target_group) {
        const Dataset d = make_dataset(x, y, z, std::nullopt);
        const auto rec = perturb_targeted(d, eta, TargetOutcome::kTrueNegative, LinearClassifier(fstar_theta),
                                          source_group, target_group, 0);
        return py::make_tuple(rec.perturbed.groups(), rec.flips());
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("fstar_theta"), py::arg("eta"),
      py::arg("source_group") = 1, py::arg("target_group") = 2,
      "Moves true negatives of f* between groups; returns (new z, number of flips).");

  m.def(
      "robust_fairness_threshold",
      [](double eta, double tau, double delta, const std::vector<double>& lambda) {
        return robust_fairness_threshold(robust_params(eta, tau, delta, lambda, std::nullopt));
      },
      py::arg("eta"), py::arg("tau"), py::arg("delta"), py::arg("lambda_"));

  m.def(
      "compute_scaling_s",
      [](double eta, double tau, double delta, const std::vector<double>& lambda,
         std::optional<std::vector<double>> gamma, std::optional<int> resolution) {
        const RobustParams p = robust_params(eta, tau, delta, lambda, std::move(gamma));
        return compute_scaling_s(p, resolution ? *resolution : default_scaling_resolution(
                                                                   static_cast<int>(lambda.size())));
      },
      py::arg("eta"), py::arg("tau"), py::arg("delta"), py::arg("lambda_"), py::arg("gamma") = py::none(),
      py::arg("resolution") = py::none());

  m.def(
      "verify_theory_json",
      [](const std::string& params_json) {
        const TheoryParams p = params_json.empty() ? TheoryParams{}
                                                   : theory_params_from_json(nlohmann::json::parse(params_json));
        return verify_all(p).to_json().dump();
      },
      py::arg("params_json") = "");

  m.def(
      "run_experiment_json",
      [](const std::string& solver, const std::string& adversary, double tau, double eta, int trials,
         std::uint64_t seed, int jobs) {
        ExperimentConfig cfg;
        cfg.solver = parse_solver(solver);
        cfg.adversary = parse_adversary(adversary);
        cfg.tau = tau;
        cfg.eta = eta;
        cfg.trials = trials;
        cfg.seed = seed;
        cfg.jobs = jobs;
        py::gil_scoped_release release;
        return run_experiment(cfg).to_json().dump();
      },
      py::arg("solver") = "err-tol-plus", py::arg("adversary") = "tn", py::arg("tau") = 0.8, py::arg("eta") = 0.05,
      py::arg("trials") = 20, py::arg("seed") = 0, py::arg("jobs") = 1);
}
