// fairguard: data generation, adversaries, training, evaluation, sweeps and
// exact theory checks from the command line.
//
//   fairguard gen-data --out train.csv
//   fairguard perturb --data train.csv --adversary tn --eta 0.05 --out noisy.csv
//   fairguard train --data noisy.csv --solver err-tol-plus --tau 0.8 --eta 0.05 --out model.json
//   fairguard evaluate --data test.csv --model model.json
//   fairguard experiment --solver err-tol --eta 0.05 --trials 20 --out report.json
//   fairguard sweep --solver err-tol --tau-grid 0.7,0.8,0.9,1.0 --out sweep.csv
//   fairguard verify-theory --out theory.json

#include "fairguard/adversaries.hpp"
#include "fairguard/convex_reduction.hpp"
#include "fairguard/data.hpp"
#include "fairguard/experiment.hpp"
#include "fairguard/hypothesis.hpp"
#include "fairguard/metrics.hpp"
#include "fairguard/solver.hpp"
#include "fairguard/theory_lab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace fairguard;
using nlohmann::json;

namespace {

std::uint64_t seed_or_env(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FAIRGUARD_SEED")) return std::stoull(env);
  return 0;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(in);
}

std::vector<MetricSpec> specs_from(const std::vector<std::string>& names) {
  std::vector<MetricSpec> out;
  for (const auto& n : names) out.push_back(MetricSpec::from_name(n));
  return out;
}

struct DataFlags {
  std::string path;
  std::string label_column = "label";
  std::string group_column = "group";

  void add(CLI::App* app, bool required) {
    auto* opt = app->add_option("--data", path, "CSV file with a header row");
    if (required) opt->required();
    app->add_option("--label-column", label_column, "label column name");
    app->add_option("--group-column", group_column, "protected-group column name");
  }
  CsvData load() const { return load_csv(path, label_column, group_column); }
};

struct SolverFlags {
  std::string solver = "err-tol-plus";
  std::vector<std::string> metrics;
  double tau = 0.8;
  double eta = 0.05;
  double delta = 0.01;
  double alpha = 0.05;
  std::vector<double> lambda;
  std::vector<double> gamma;
  std::string heuristic = "label";
  SolverConfig config;

  void add(CLI::App* app) {
    app->add_option("--solver", solver, "uncons, target-fair, err-tol, err-tol-plus, general, reduced")
        ->check(CLI::IsMember({"uncons", "target-fair", "err-tol", "err-tol-plus", "general", "reduced"}));
    app->add_option("--metric", metrics, "sr, fpr, tpr or fdr; repeat for the general solver")
        ->check(CLI::IsMember({"sr", "fpr", "tpr", "fdr"}));
    app->add_option("--tau", tau, "target fairness");
    app->add_option("--eta", eta, "perturbation budget");
    app->add_option("--delta", delta, "slack added to eta in the robust bounds");
    app->add_option("--alpha", alpha, "interval width of the convex reduction");
    app->add_option("--lambda", lambda, "per-group lambda (overrides the heuristic)")->delimiter(',');
    app->add_option("--gamma", gamma, "per-group gamma (defaults to lambda)")->delimiter(',');
    app->add_option("--lambda-heuristic", heuristic, "label or conditioning")
        ->check(CLI::IsMember({"label", "conditioning"}));
    app->add_option("--max-iters", config.max_iters, "inner iterations per restart");
    app->add_option("--restarts", config.restarts, "restarts while infeasible");
    app->add_option("--temperature", config.temperature, "soft-indicator temperature");
    app->add_flag("--use-protected", config.use_protected, "append the group code as a feature");
  }
  std::vector<std::string> metric_names() const {
    return metrics.empty() ? std::vector<std::string>{"sr"} : metrics;
  }
};

struct SyntheticFlags {
  std::size_t n = 1000;
  std::vector<double> fractions;
  std::optional<std::uint64_t> data_seed;

  void add(CLI::App* app) {
    app->add_option("--n", n, "number of synthetic samples");
    app->add_option("--fractions", fractions, "group fractions, e.g. 0.5,0.5")->delimiter(',');
    app->add_option("--data-seed", data_seed, "synthetic data seed (defaults to 0)");
  }
  SyntheticConfig config() const {
    SyntheticConfig cfg;
    cfg.n = n;
    if (!fractions.empty()) cfg.group_fractions = fractions;
    cfg.seed = data_seed.value_or(0);
    return cfg;
  }
};

json classifier_json(const LinearClassifier& clf) {
  return {{"theta", std::vector<double>(clf.theta.data(), clf.theta.data() + clf.theta.size())},
          {"use_protected", clf.use_protected},
          {"temperature", clf.temperature}};
}

LinearClassifier classifier_from_json(const json& j) {
  const auto theta = j.at("theta").get<std::vector<double>>();
  return LinearClassifier(Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())),
                          j.value("use_protected", false), j.value("temperature", 1.0));
}

ExperimentConfig experiment_config(const DataFlags& data, const SyntheticFlags& synth, const SolverFlags& sf,
                                   const std::string& adversary, int trials, std::uint64_t seed, int jobs,
                                   bool timing) {
  ExperimentConfig cfg;
  if (!data.path.empty()) {
    cfg.source = DataSource::kCsv;
    cfg.csv_path = data.path;
    cfg.label_column = data.label_column;
    cfg.group_column = data.group_column;
  } else if (adversary == "coupling") {
    cfg.source = DataSource::kFamilyA;
    cfg.family_n = synth.n;
    cfg.synthetic.seed = synth.data_seed.value_or(0);
  } else {
    cfg.synthetic = synth.config();
  }
  cfg.adversary = parse_adversary(adversary);
  cfg.solver = parse_solver(sf.solver);
  cfg.metrics = sf.metric_names();
  cfg.tau = sf.tau;
  cfg.eta = sf.eta;
  cfg.delta = sf.delta;
  cfg.alpha = sf.alpha;
  cfg.lambda_override = sf.lambda;
  cfg.gamma_override = sf.gamma;
  cfg.lambda_heuristic = parse_lambda_heuristic(sf.heuristic);
  cfg.solver_config = sf.config;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.jobs = jobs;
  cfg.record_timing = timing;
  return cfg;
}

void print_summary(const TrialReport& r) {
  std::cerr << "accuracy " << r.accuracy.mean << " (sd " << r.accuracy.sd << ")";
  for (std::size_t m = 0; m < r.fairness.size(); ++m) {
    std::cerr << ", " << r.config.metrics[m] << ' ' << r.fairness[m].mean << " (sd " << r.fairness[m].sd << ")";
  }
  std::cerr << ", feasible " << r.feasible_rate << ", failed trials " << r.failed_trials << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair classification under adversarial perturbation of protected attributes"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic or family-A dataset as CSV");
  SyntheticFlags gen_synth;
  gen_synth.add(gen);
  std::string gen_out;
  std::string gen_family;
  double gen_c = 0.3;
  double gen_alpha = 0.1;
  gen->add_option("--out", gen_out, "output CSV")->required();
  gen->add_option("--family", gen_family, "draw from family A's first distribution instead")
      ->check(CLI::IsMember({"a"}));
  gen->add_option("--family-c", gen_c, "family A parameter c");
  gen->add_option("--family-alpha", gen_alpha, "family A parameter alpha");

  // perturb
  auto* pert = app.add_subcommand("perturb", "apply an adversary to a dataset");
  DataFlags pert_data;
  pert_data.add(pert, true);
  std::string pert_adv = "tn";
  double pert_eta = 0.05;
  double pert_tau = 0.8;
  std::string pert_metric = "sr";
  int pert_src = 1;
  int pert_tgt = 2;
  std::vector<double> pert_rates;
  double pert_c = 0.3;
  double pert_alpha = 0.1;
  std::optional<std::uint64_t> pert_seed;
  std::string pert_out;
  std::string pert_record;
  pert->add_option("--adversary", pert_adv, "tn, fn, fp, flip, prh, coupling, nasty")
      ->check(CLI::IsMember({"tn", "fn", "fp", "flip", "prh", "coupling", "nasty"}));
  pert->add_option("--eta", pert_eta, "perturbation budget");
  pert->add_option("--tau", pert_tau, "fairness target of the adversary's classifier");
  pert->add_option("--metric", pert_metric, "metric of the adversary's classifier")
      ->check(CLI::IsMember({"sr", "fpr", "tpr", "fdr"}));
  pert->add_option("--source-group", pert_src, "group the targeted adversaries move samples from");
  pert->add_option("--target-group", pert_tgt, "group the targeted adversaries move samples to");
  pert->add_option("--flip-rates", pert_rates, "per-group flip probabilities")->delimiter(',');
  pert->add_option("--family-c", pert_c, "family A parameter c (coupling)");
  pert->add_option("--family-alpha", pert_alpha, "family A parameter alpha (coupling)");
  pert->add_option("--seed", pert_seed, "seed (falls back to FAIRGUARD_SEED)");
  pert->add_option("--out", pert_out, "perturbed CSV")->required();
  pert->add_option("--record", pert_record, "JSON record with the flip mask");

  // train
  auto* train = app.add_subcommand("train", "fit one solver variant on a dataset");
  DataFlags train_data;
  train_data.add(train, true);
  SolverFlags train_solver;
  train_solver.add(train);
  std::optional<std::uint64_t> train_seed;
  std::string train_out;
  train->add_option("--seed", train_seed, "seed (falls back to FAIRGUARD_SEED)");
  train->add_option("--out", train_out, "model JSON (stdout when omitted)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "accuracy and fairness of a model on a dataset");
  DataFlags eval_data;
  eval_data.add(eval, true);
  std::string eval_model;
  std::vector<std::string> eval_metrics;
  std::string eval_out;
  eval->add_option("--model", eval_model, "model JSON from train")->required();
  eval->add_option("--metric", eval_metrics, "metrics to report")->check(CLI::IsMember({"sr", "fpr", "tpr", "fdr"}));
  eval->add_option("--out", eval_out, "output JSON (stdout when omitted)");

  // experiment / sweep share most flags
  const auto add_experiment_flags = [](CLI::App* sub, DataFlags& data, SyntheticFlags& synth, SolverFlags& sf,
                                       std::string& adv, int& trials, std::optional<std::uint64_t>& seed,
                                       int& jobs, bool& timing) {
    data.add(sub, false);
    synth.add(sub);
    sf.add(sub);
    sub->add_option("--adversary", adv, "none, tn, fn, fp, flip, prh, coupling, nasty")
        ->check(CLI::IsMember({"none", "tn", "fn", "fp", "flip", "prh", "coupling", "nasty"}));
    sub->add_option("--trials", trials, "number of trials");
    sub->add_option("--seed", seed, "seed (falls back to FAIRGUARD_SEED)");
    sub->add_option("--jobs", jobs, "trials run concurrently");
    sub->add_flag("--timing", timing, "record per-trial wall time");
  };

  auto* exp = app.add_subcommand("experiment", "repeated split / perturb / fit / evaluate trials");
  DataFlags exp_data;
  SyntheticFlags exp_synth;
  SolverFlags exp_solver;
  std::string exp_adv = "tn";
  int exp_trials = 20;
  std::optional<std::uint64_t> exp_seed;
  int exp_jobs = 1;
  bool exp_timing = false;
  std::string exp_out;
  add_experiment_flags(exp, exp_data, exp_synth, exp_solver, exp_adv, exp_trials, exp_seed, exp_jobs, exp_timing);
  exp->add_option("--out", exp_out, "report JSON (stdout when omitted)");

  auto* swp = app.add_subcommand("sweep", "run an experiment per grid point");
  DataFlags swp_data;
  SyntheticFlags swp_synth;
  SolverFlags swp_solver;
  std::string swp_adv = "tn";
  int swp_trials = 20;
  std::optional<std::uint64_t> swp_seed;
  int swp_jobs = 1;
  bool swp_timing = false;
  SweepGrid grid;
  std::string swp_out;
  std::string swp_report;
  add_experiment_flags(swp, swp_data, swp_synth, swp_solver, swp_adv, swp_trials, swp_seed, swp_jobs, swp_timing);
  swp->add_option("--tau-grid", grid.taus, "tau values")->delimiter(',');
  swp->add_option("--eta-grid", grid.etas, "eta values")->delimiter(',');
  swp->add_option("--fraction-grid", grid.group_fractions, "group-1 fractions (synthetic data)")->delimiter(',');
  swp->add_option("--out", swp_out, "summary CSV (stdout when omitted)");
  swp->add_option("--report", swp_report, "full JSON reports");

  auto* theory = app.add_subcommand("verify-theory", "exact checks of the lower-bound constructions");
  std::string theory_params;
  std::string theory_out;
  bool theory_lenient = false;
  theory->add_option("--params", theory_params, "JSON parameter file");
  theory->add_option("--out", theory_out, "report JSON (stdout when omitted)");
  theory->add_flag("--non-strict-witness", theory_lenient,
                   "family A witnesses need err <= c*alpha/2 instead of err < c*alpha/2");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (gen_family == "a") {
        const auto fam = build_family_a(gen_c, gen_alpha);
        const Dataset d = sample_from(fam[0], gen_synth.n == 1000 ? 5000 : gen_synth.n, gen_synth.data_seed.value_or(0));
        save_csv(d, gen_out, fam[0].x_ids());
      } else {
        save_csv(generate_synthetic(gen_synth.config()), gen_out);
      }
      return 0;
    }

    if (*pert) {
      const std::uint64_t seed = seed_or_env(pert_seed);
      const CsvData csv = pert_data.load();
      const Dataset& d = csv.dataset;
      PerturbationRecord rec;
      const AdversaryKind kind = parse_adversary(pert_adv);
      std::optional<LinearClassifier> fstar;
      if (kind == AdversaryKind::kTrueNegative || kind == AdversaryKind::kFalseNegative ||
          kind == AdversaryKind::kFalsePositive || kind == AdversaryKind::kNasty) {
        SolverConfig sc;
        sc.seed = seed;
        fstar = fit_target_fair(d, MetricSpec::from_name(pert_metric), pert_tau, sc).classifier;
      }
      switch (kind) {
        case AdversaryKind::kTrueNegative:
          rec = perturb_targeted(d, pert_eta, TargetOutcome::kTrueNegative, *fstar, pert_src, pert_tgt, seed);
          break;
        case AdversaryKind::kFalseNegative:
          rec = perturb_targeted(d, pert_eta, TargetOutcome::kFalseNegative, *fstar, pert_src, pert_tgt, seed);
          break;
        case AdversaryKind::kFalsePositive:
          rec = perturb_targeted(d, pert_eta, TargetOutcome::kFalsePositive, *fstar, pert_src, pert_tgt, seed);
          break;
        case AdversaryKind::kFlip:
          rec = perturb_flip(d, pert_rates.empty() ? std::vector<double>{pert_eta, pert_eta} : pert_rates, seed);
          break;
        case AdversaryKind::kPRestricted: {
          const int p = d.num_groups();
          Eigen::MatrixXd m = Eigen::MatrixXd::Constant(p, p, pert_eta / (p - 1));
          m.diagonal().setConstant(1.0 - pert_eta);
          rec = perturb_p_restricted(d, FlipMatrix(m), seed);
          break;
        }
        case AdversaryKind::kCoupling: {
          const auto fam = build_family_a(pert_c, pert_alpha);
          rec = perturb_tv_coupling(d, fam[0], fam[1], pert_eta, seed);
          break;
        }
        case AdversaryKind::kNasty:
          rec = perturb_nasty_labels(d, pert_eta, *fstar, seed);
          break;
        case AdversaryKind::kNone:
          break;
      }
      save_csv(rec.perturbed, pert_out, csv.feature_names);
      if (!pert_record.empty()) {
        std::vector<int> mask(rec.flip_mask.begin(), rec.flip_mask.end());
        json j{{"kind", rec.kind},
               {"budget_eta", rec.budget_eta},
               {"budget", rec.budget},
               {"flips", rec.flips()},
               {"budget_exceeded", rec.budget_exceeded},
               {"rng_seed", rec.rng_seed},
               {"group_codes", csv.group_codes},
               {"flip_mask", mask}};
        write_text(pert_record, j.dump(2) + "\n");
      }
      std::cerr << rec.kind << ": " << rec.flips() << " of " << d.size() << " samples altered (budget "
                << rec.budget << (rec.budget_exceeded ? ", exceeded; input returned" : "") << ")\n";
      return 0;
    }

    if (*train) {
      const std::uint64_t seed = seed_or_env(train_seed);
      const CsvData csv = train_data.load();
      const Dataset& d = csv.dataset;
      const auto specs = specs_from(train_solver.metric_names());
      SolverConfig sc = train_solver.config;
      sc.seed = seed;
      RobustParams params;
      const SolverKind kind = parse_solver(train_solver.solver);
      const bool robust = kind != SolverKind::kUncons && kind != SolverKind::kTargetFair;
      if (robust) {
        if (!train_solver.lambda.empty()) {
          params.eta = train_solver.eta;
          params.tau = train_solver.tau;
          params.delta = train_solver.delta;
          params.lambda = train_solver.lambda;
          params.gamma = train_solver.gamma.empty() ? train_solver.lambda : train_solver.gamma;
        } else {
          params = heuristic_params(d, specs, train_solver.eta, train_solver.tau, train_solver.delta,
                                    parse_lambda_heuristic(train_solver.heuristic));
        }
      }
      SolveResult res;
      int box = 0;
      switch (kind) {
        case SolverKind::kUncons: res = fit_unconstrained(d, sc); break;
        case SolverKind::kTargetFair: res = fit_target_fair(d, specs[0], train_solver.tau, sc); break;
        case SolverKind::kErrTolerant: res = fit_err_tolerant(d, specs[0], params, sc); break;
        case SolverKind::kErrTolerantPlus: res = fit_err_tolerant_plus(d, specs[0], params, sc); break;
        case SolverKind::kGeneral: res = fit_general_err_tolerant(d, specs, params, sc); break;
        case SolverKind::kReduced: {
          auto red = fit_reduced(d, specs[0], params, train_solver.alpha, sc);
          box = red.winning_box;
          res = std::move(red.result);
          break;
        }
      }
      json j{{"solver", train_solver.solver},
             {"classifier", classifier_json(res.classifier)},
             {"feasible", res.feasible},
             {"objective", res.objective},
             {"constraint_slacks", res.constraint_slacks},
             {"restarts_used", res.restarts_used},
             {"fairness_threshold", res.fairness_threshold},
             {"metrics", train_solver.metric_names()},
             {"seed", seed}};
      if (robust) {
        j["lambda"] = params.lambda;
        j["gamma"] = params.gamma;
      }
      if (kind == SolverKind::kReduced) j["winning_box"] = box;
      write_text(train_out, j.dump(2) + "\n");
      return 0;
    }

    if (*eval) {
      const json model = read_json(eval_model);
      const LinearClassifier clf = classifier_from_json(model.contains("classifier") ? model.at("classifier") : model);
      const CsvData csv = eval_data.load();
      const Predictions preds = predict_hard(clf, csv.dataset);
      std::vector<std::string> names = eval_metrics;
      if (names.empty()) names = model.value("metrics", std::vector<std::string>{"sr"});
      json fair = json::object();
      for (const auto& name : names) {
        const PerformanceTable t = group_performance(csv.dataset, preds, MetricSpec::from_name(name));
        json q = json::array();
        for (const auto& v : t.q) q.push_back(v ? json(*v) : json(nullptr));
        fair[name] = {{"omega", fairness_value(t)}, {"per_group", q}};
      }
      json j{{"n", csv.dataset.size()},
             {"accuracy", 1.0 - empirical_error(csv.dataset, preds)},
             {"fairness", fair},
             {"group_codes", csv.group_codes}};
      write_text(eval_out, j.dump(2) + "\n");
      return 0;
    }

    if (*exp) {
      const ExperimentConfig cfg = experiment_config(exp_data, exp_synth, exp_solver, exp_adv, exp_trials,
                                                     seed_or_env(exp_seed), exp_jobs, exp_timing);
      const TrialReport report = run_experiment(cfg);
      write_text(exp_out, report.to_json().dump(2) + "\n");
      print_summary(report);
      return report.complete() ? 0 : 1;
    }

    if (*swp) {
      const ExperimentConfig cfg = experiment_config(swp_data, swp_synth, swp_solver, swp_adv, swp_trials,
                                                     seed_or_env(swp_seed), swp_jobs, swp_timing);
      const auto points = sweep(cfg, grid);
      write_text(swp_out, sweep_csv(points));
      bool complete = true;
      json all = json::array();
      for (const auto& p : points) {
        complete = complete && p.report.complete();
        if (!swp_report.empty()) all.push_back(p.report.to_json());
      }
      if (!swp_report.empty()) write_text(swp_report, all.dump(2) + "\n");
      return complete ? 0 : 1;
    }

    if (*theory) {
      TheoryParams params = theory_params.empty() ? TheoryParams{} : theory_params_from_json(read_json(theory_params));
      if (theory_lenient) params.strict_family_a_witness = false;
      const TheoryReport report = verify_all(params);
      json j = report.to_json();
      j["params"] = to_json(params);
      write_text(theory_out, j.dump(2) + "\n");
      for (const auto& c : report.checks) {
        std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << (c.gating ? "" : " (informational)") << '\n';
        if (!c.passed && c.detail.contains("counterexamples")) {
          for (const auto& ce : c.detail.at("counterexamples")) {
            std::cerr << "  violating classifier: " << ce.at("classifier").at("assignment").get<std::string>() << '\n';
          }
        }
      }
      return report.passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
