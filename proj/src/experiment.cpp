#include "fairguard/experiment.hpp"

#include "fairguard/convex_reduction.hpp"
#include "fairguard/hypothesis.hpp"
#include "fairguard/rng.hpp"
#include "fairguard/theory_lab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fairguard {
namespace {

using nlohmann::json;

// Sub-stream indices under a trial seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kTargetStream = 2;
constexpr std::uint64_t kAdversaryStream = 3;
constexpr std::uint64_t kSolverStream = 4;

bool needs_target_classifier(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::kTrueNegative:
    case AdversaryKind::kFalseNegative:
    case AdversaryKind::kFalsePositive:
    case AdversaryKind::kNasty:
      return true;
    default:
      return false;
  }
}

std::vector<double> fairness_per_metric(const Dataset& d, const Predictions& preds,
                                        const std::vector<MetricSpec>& specs) {
  std::vector<double> out;
  for (const auto& s : specs) out.push_back(fairness_value(group_performance(d, preds, s)));
  return out;
}

json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"sd", s.sd}, {"stderr", s.std_error}};
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::kSynthetic: return "synthetic";
    case DataSource::kCsv: return "csv";
    case DataSource::kFamilyA: return "family-a";
  }
  return "unknown";
}

std::string num(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

}  // namespace

SolverKind parse_solver(const std::string& name) {
  if (name == "uncons") return SolverKind::kUncons;
  if (name == "target-fair") return SolverKind::kTargetFair;
  if (name == "err-tol") return SolverKind::kErrTolerant;
  if (name == "err-tol-plus") return SolverKind::kErrTolerantPlus;
  if (name == "general") return SolverKind::kGeneral;
  if (name == "reduced") return SolverKind::kReduced;
  throw std::invalid_argument("unknown solver '" + name + "'");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kUncons: return "uncons";
    case SolverKind::kTargetFair: return "target-fair";
    case SolverKind::kErrTolerant: return "err-tol";
    case SolverKind::kErrTolerantPlus: return "err-tol-plus";
    case SolverKind::kGeneral: return "general";
    case SolverKind::kReduced: return "reduced";
  }
  return "unknown";
}

AdversaryKind parse_adversary(const std::string& name) {
  if (name == "none") return AdversaryKind::kNone;
  if (name == "tn") return AdversaryKind::kTrueNegative;
  if (name == "fn") return AdversaryKind::kFalseNegative;
  if (name == "fp") return AdversaryKind::kFalsePositive;
  if (name == "flip") return AdversaryKind::kFlip;
  if (name == "prh") return AdversaryKind::kPRestricted;
  if (name == "coupling") return AdversaryKind::kCoupling;
  if (name == "nasty") return AdversaryKind::kNasty;
  throw std::invalid_argument("unknown adversary '" + name + "'");
}

std::string to_string(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::kNone: return "none";
    case AdversaryKind::kTrueNegative: return "tn";
    case AdversaryKind::kFalseNegative: return "fn";
    case AdversaryKind::kFalsePositive: return "fp";
    case AdversaryKind::kFlip: return "flip";
    case AdversaryKind::kPRestricted: return "prh";
    case AdversaryKind::kCoupling: return "coupling";
    case AdversaryKind::kNasty: return "nasty";
  }
  return "unknown";
}

LambdaHeuristic parse_lambda_heuristic(const std::string& name) {
  if (name == "label") return LambdaHeuristic::kLabelPlugIn;
  if (name == "conditioning") return LambdaHeuristic::kConditioningMass;
  throw std::invalid_argument("unknown lambda heuristic '" + name + "'");
}

std::string to_string(LambdaHeuristic heuristic) {
  return heuristic == LambdaHeuristic::kLabelPlugIn ? "label" : "conditioning";
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be positive");
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
  if (metrics.empty()) throw std::invalid_argument("at least one metric is required");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (metrics.size() > 1 && solver != SolverKind::kGeneral) {
    throw std::invalid_argument("several metrics need the general solver");
  }
  if (source == DataSource::kCsv && csv_path.empty()) throw std::invalid_argument("csv path is empty");
  if (adversary == AdversaryKind::kCoupling && source != DataSource::kFamilyA) {
    throw std::invalid_argument("the coupling adversary needs family-a data");
  }
  if (source == DataSource::kSynthetic) synthetic.validate();
  solver_config.validate();
  metric_specs();
}

std::vector<MetricSpec> ExperimentConfig::metric_specs() const {
  std::vector<MetricSpec> out;
  for (const auto& m : metrics) out.push_back(MetricSpec::from_name(m));
  return out;
}

json to_json(const ExperimentConfig& c) {
  json means = json::array();
  for (const auto& g : c.synthetic.cluster_means) means.push_back({g[0], g[1]});
  return {
      {"source", to_string(c.source)},
      {"synthetic",
       {{"n", c.synthetic.n},
        {"group_fractions", c.synthetic.group_fractions},
        {"cluster_means", means},
        {"cluster_cov_scale", c.synthetic.cluster_cov_scale},
        {"positive_rates", c.synthetic.positive_rates},
        {"exact_label_counts", c.synthetic.exact_label_counts},
        {"seed", c.synthetic.seed}}},
      {"csv_path", c.csv_path},
      {"label_column", c.label_column},
      {"group_column", c.group_column},
      {"family", {{"c", c.family_c}, {"alpha", c.family_alpha}, {"n", c.family_n}}},
      {"train_fraction", c.train_fraction},
      {"stratified_split", c.stratified_split},
      {"adversary", to_string(c.adversary)},
      {"source_group", c.source_group},
      {"target_group", c.target_group},
      {"flip_rates", c.flip_rates},
      {"solver", to_string(c.solver)},
      {"metrics", c.metrics},
      {"tau", c.tau},
      {"eta", c.eta},
      {"delta", c.delta},
      {"alpha", c.alpha},
      {"lambda_heuristic", to_string(c.lambda_heuristic)},
      {"lambda_override", c.lambda_override},
      {"gamma_override", c.gamma_override},
      {"solver_config",
       {{"max_iters", c.solver_config.max_iters},
        {"conv_tol", c.solver_config.conv_tol},
        {"fd_step", c.solver_config.fd_step},
        {"restarts", c.solver_config.restarts},
        {"init_box", c.solver_config.init_box},
        {"temperature", c.solver_config.temperature},
        {"use_protected", c.solver_config.use_protected}}},
      {"trials", c.trials},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"record_timing", c.record_timing},
  };
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.count - 1));
    s.std_error = s.sd / std::sqrt(static_cast<double>(s.count));
  }
  return s;
}

Dataset load_experiment_data(const ExperimentConfig& cfg) {
  switch (cfg.source) {
    case DataSource::kSynthetic: return generate_synthetic(cfg.synthetic);
    case DataSource::kCsv: return load_csv(cfg.csv_path, cfg.label_column, cfg.group_column).dataset;
    case DataSource::kFamilyA: {
      const auto fam = build_family_a(cfg.family_c, cfg.family_alpha);
      return sample_from(fam[0], cfg.family_n, cfg.synthetic.seed);
    }
  }
  throw std::invalid_argument("unknown data source");
}

TrialResult run_trial(const ExperimentConfig& cfg, const Dataset& data, int trial) {
  const auto start = std::chrono::steady_clock::now();
  TrialResult r;
  r.trial = trial;
  r.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
  const auto specs = cfg.metric_specs();

  auto [train, test] =
      split_train_test(data, cfg.train_fraction, derive_seed(r.seed, kSplitStream), cfg.stratified_split);

  LinearClassifier fstar;
  if (needs_target_classifier(cfg.adversary)) {
    SolverConfig sc = cfg.solver_config;
    sc.seed = derive_seed(r.seed, kTargetStream);
    fstar = fit_target_fair(train, specs[0], cfg.tau, sc).classifier;
    const Predictions fp = predict_hard(fstar, test);
    r.fstar_accuracy = 1.0 - empirical_error(test, fp);
    r.fstar_fairness = fairness_per_metric(test, fp, specs);
  }

  const std::uint64_t adv_seed = derive_seed(r.seed, kAdversaryStream);
  PerturbationRecord rec;
  switch (cfg.adversary) {
    case AdversaryKind::kNone:
      rec.perturbed = train;
      rec.flip_mask.assign(train.size(), false);
      rec.kind = "none";
      break;
    case AdversaryKind::kTrueNegative:
      rec = perturb_targeted(train, cfg.eta, TargetOutcome::kTrueNegative, fstar, cfg.source_group,
                             cfg.target_group, adv_seed);
      break;
    case AdversaryKind::kFalseNegative:
      rec = perturb_targeted(train, cfg.eta, TargetOutcome::kFalseNegative, fstar, cfg.source_group,
                             cfg.target_group, adv_seed);
      break;
    case AdversaryKind::kFalsePositive:
      rec = perturb_targeted(train, cfg.eta, TargetOutcome::kFalsePositive, fstar, cfg.source_group,
                             cfg.target_group, adv_seed);
      break;
    case AdversaryKind::kFlip:
      rec = perturb_flip(train, cfg.flip_rates.empty() ? std::vector<double>{cfg.eta, cfg.eta} : cfg.flip_rates,
                         adv_seed);
      break;
    case AdversaryKind::kPRestricted: {
      const int p = train.num_groups();
      Eigen::MatrixXd m = Eigen::MatrixXd::Constant(p, p, cfg.eta / (p - 1));
      m.diagonal().setConstant(1.0 - cfg.eta);
      rec = perturb_p_restricted(train, FlipMatrix(m), adv_seed);
      break;
    }
    case AdversaryKind::kCoupling: {
      const auto fam = build_family_a(cfg.family_c, cfg.family_alpha);
      rec = perturb_tv_coupling(train, fam[0], fam[1], cfg.eta, adv_seed);
      break;
    }
    case AdversaryKind::kNasty:
      rec = perturb_nasty_labels(train, cfg.eta, fstar, adv_seed);
      break;
  }
  r.flips = rec.flips();
  r.flip_budget = rec.budget;
  r.budget_exceeded = rec.budget_exceeded;
  const Dataset& perturbed = rec.perturbed;

  SolverConfig sc = cfg.solver_config;
  sc.seed = derive_seed(r.seed, kSolverStream);
  const auto robust = [&] {
    if (!cfg.lambda_override.empty()) {
      RobustParams p;
      p.eta = cfg.eta;
      p.tau = cfg.tau;
      p.delta = cfg.delta;
      p.lambda = cfg.lambda_override;
      p.gamma = cfg.gamma_override.empty() ? cfg.lambda_override : cfg.gamma_override;
      return p;
    }
    return heuristic_params(perturbed, specs, cfg.eta, cfg.tau, cfg.delta, cfg.lambda_heuristic);
  };

  SolveResult res;
  switch (cfg.solver) {
    case SolverKind::kUncons: res = fit_unconstrained(perturbed, sc); break;
    case SolverKind::kTargetFair: res = fit_target_fair(perturbed, specs[0], cfg.tau, sc); break;
    case SolverKind::kErrTolerant:
    case SolverKind::kErrTolerantPlus:
    case SolverKind::kGeneral:
    case SolverKind::kReduced: {
      const RobustParams params = robust();
      r.lambda = params.lambda;
      r.gamma = params.gamma;
      if (cfg.solver == SolverKind::kErrTolerant) {
        res = fit_err_tolerant(perturbed, specs[0], params, sc);
      } else if (cfg.solver == SolverKind::kErrTolerantPlus) {
        res = fit_err_tolerant_plus(perturbed, specs[0], params, sc);
      } else if (cfg.solver == SolverKind::kGeneral) {
        res = fit_general_err_tolerant(perturbed, specs, params, sc);
      } else {
        ReducedResult red = fit_reduced(perturbed, specs[0], params, cfg.alpha, sc);
        r.winning_box = red.winning_box;
        res = std::move(red.result);
      }
      break;
    }
  }

  r.feasible = res.feasible;
  r.objective = res.objective;
  r.restarts_used = res.restarts_used;
  r.fairness_threshold = res.fairness_threshold;
  r.theta.assign(res.classifier.theta.data(), res.classifier.theta.data() + res.classifier.theta.size());

  const Predictions test_preds = predict_hard(res.classifier, test);
  r.accuracy = 1.0 - empirical_error(test, test_preds);
  r.fairness = fairness_per_metric(test, test_preds, specs);
  r.train_fairness = fairness_per_metric(perturbed, predict_hard(res.classifier, perturbed), specs);
  if (cfg.record_timing) {
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return r;
}

TrialReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset data = load_experiment_data(cfg);

  TrialReport report;
  report.config = cfg;
  report.trials.resize(static_cast<std::size_t>(cfg.trials));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int t = next++; t < cfg.trials; t = next++) {
      auto& slot = report.trials[static_cast<std::size_t>(t)];
      try {
        slot = run_trial(cfg, data, t);
      } catch (const std::exception& e) {
        slot = TrialResult{};
        slot.trial = t;
        slot.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
        slot.error = e.what();
      }
    }
  };
  const int workers = std::min(cfg.jobs, cfg.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<double> acc;
  std::vector<std::vector<double>> fair(cfg.metrics.size());
  std::size_t feasible = 0;
  for (const auto& t : report.trials) {
    if (t.error) {
      ++report.failed_trials;
      continue;
    }
    acc.push_back(t.accuracy);
    for (std::size_t m = 0; m < fair.size(); ++m) fair[m].push_back(t.fairness[m]);
    if (t.feasible) ++feasible;
  }
  report.accuracy = summarize(acc);
  for (const auto& f : fair) report.fairness.push_back(summarize(f));
  report.feasible_rate = acc.empty() ? 0.0 : static_cast<double>(feasible) / static_cast<double>(acc.size());
  return report;
}

json TrialReport::to_json() const {
  json trials_json = json::array();
  for (const auto& t : trials) {
    json j{{"trial", t.trial}, {"seed", t.seed}};
    if (t.error) {
      j["error"] = *t.error;
      trials_json.push_back(j);
      continue;
    }
    j["accuracy"] = t.accuracy;
    j["fairness"] = t.fairness;
    j["train_fairness"] = t.train_fairness;
    j["feasible"] = t.feasible;
    j["objective"] = t.objective;
    j["restarts_used"] = t.restarts_used;
    j["fairness_threshold"] = t.fairness_threshold;
    j["lambda"] = t.lambda;
    j["gamma"] = t.gamma;
    j["flips"] = t.flips;
    j["flip_budget"] = t.flip_budget;
    j["budget_exceeded"] = t.budget_exceeded;
    j["winning_box"] = t.winning_box;
    j["fstar_accuracy"] = t.fstar_accuracy ? json(*t.fstar_accuracy) : json(nullptr);
    j["fstar_fairness"] = t.fstar_fairness;
    j["theta"] = t.theta;
    if (config.record_timing) j["wall_seconds"] = t.wall_seconds;
    trials_json.push_back(j);
  }
  json fair = json::object();
  for (std::size_t m = 0; m < fairness.size(); ++m) fair[config.metrics[m]] = summary_json(fairness[m]);
  return {{"config", fairguard::to_json(config)},
          {"seed_derivation",
           "trial seed = splitmix64(seed ^ trial); split, target classifier, adversary and solver "
           "use splitmix64(trial seed ^ k) for k = 1, 2, 3, 4"},
          {"trials", trials_json},
          {"summary",
           {{"accuracy", summary_json(accuracy)},
            {"fairness", fair},
            {"feasible_rate", feasible_rate},
            {"failed_trials", failed_trials}}}};
}

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, const SweepGrid& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  const std::vector<double> taus = grid.taus.empty() ? std::vector<double>{cfg.tau} : grid.taus;
  const std::vector<double> etas = grid.etas.empty() ? std::vector<double>{cfg.eta} : grid.etas;
  std::vector<std::optional<double>> fracs;
  if (grid.group_fractions.empty()) {
    fracs.emplace_back();
  } else {
    if (cfg.source != DataSource::kSynthetic) {
      throw std::invalid_argument("group-fraction sweeps need synthetic data");
    }
    for (double f : grid.group_fractions) fracs.emplace_back(f);
  }

  std::vector<SweepPoint> out;
  for (double tau : taus) {
    for (double eta : etas) {
      for (const auto& frac : fracs) {
        ExperimentConfig c = cfg;
        c.tau = tau;
        c.eta = eta;
        if (frac) c.synthetic.group_fractions = {*frac, 1.0 - *frac};
        out.push_back({tau, eta, frac, run_experiment(c)});
      }
    }
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "tau,eta,group_fraction,trials,failed,mean_acc,sd_acc,stderr_acc";
  const auto& metrics = points.empty() ? std::vector<std::string>{} : points.front().report.config.metrics;
  for (const auto& m : metrics) out << ",mean_" << m << ",sd_" << m << ",stderr_" << m;
  out << ",feasible_rate\n";
  for (const auto& p : points) {
    const auto& r = p.report;
    out << num(p.tau) << ',' << num(p.eta) << ',' << (p.group_fraction ? num(*p.group_fraction) : "")
        << ',' << r.accuracy.count << ',' << r.failed_trials << ',' << num(r.accuracy.mean) << ','
        << num(r.accuracy.sd) << ',' << num(r.accuracy.std_error);
    for (const auto& f : r.fairness) out << ',' << num(f.mean) << ',' << num(f.sd) << ',' << num(f.std_error);
    out << ',' << num(r.feasible_rate) << '\n';
  }
  return out.str();
}

}  // namespace fairguard
