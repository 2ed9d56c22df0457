#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fairguard/data.hpp"
#include "fairguard/experiment.hpp"
#include "fairguard/theory_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace fairguard;
namespace fs = std::filesystem;

namespace {

ExperimentConfig base(SolverKind solver, double eta, int trials) {
  ExperimentConfig cfg;
  cfg.solver = solver;
  cfg.eta = eta;
  cfg.trials = trials;
  return cfg;
}

struct Run {
  int code = 0;
  std::string output;
};

// Runs the CLI binary and captures stdout and stderr together.
Run cli(const std::string& args) {
  const std::string cmd = std::string(FAIRGUARD_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (fgets(buf, sizeof buf, pipe) != nullptr) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("summary statistics") {
  const Summary s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.count == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(summarize({}).count == 0);
  CHECK(summarize({7.0}).sd == 0.0);
}

TEST_CASE("parsers") {
  CHECK(parse_solver("err-tol-plus") == SolverKind::kErrTolerantPlus);
  CHECK(to_string(SolverKind::kReduced) == "reduced");
  CHECK(parse_adversary("prh") == AdversaryKind::kPRestricted);
  CHECK(parse_lambda_heuristic("conditioning") == LambdaHeuristic::kConditioningMass);
  CHECK_THROWS(parse_solver("slsqp"));
  CHECK_THROWS(parse_adversary("tp"));
}

TEST_CASE("single experiment is reproducible and self-describing") {
  ExperimentConfig cfg = base(SolverKind::kErrTolerantPlus, 0.05, 1);
  cfg.seed = 17;
  const std::string a = run_experiment(cfg).to_json().dump();
  const std::string b = run_experiment(cfg).to_json().dump();
  CHECK(a == b);

  const auto j = nlohmann::json::parse(a);
  CHECK(j.at("config").at("seed") == 17);
  CHECK(j.at("config").at("solver") == "err-tol-plus");
  CHECK(j.at("trials").size() == 1);
  CHECK(j.at("trials")[0].contains("seed"));
  CHECK(j.at("trials")[0].at("flips").get<int>() > 0);
}

TEST_CASE("parallel trials match serial ones") {
  ExperimentConfig cfg = base(SolverKind::kErrTolerant, 0.03, 4);
  const auto serial = run_experiment(cfg).to_json();
  cfg.jobs = 3;
  auto parallel = run_experiment(cfg).to_json();
  parallel["config"]["jobs"] = 1;
  CHECK(serial.dump() == parallel.dump());
}

TEST_CASE("aggregates are recomputable from trials") {
  const TrialReport r = run_experiment(base(SolverKind::kUncons, 0.0, 5));
  CHECK(r.complete());
  std::vector<double> acc, sr;
  for (const auto& t : r.trials) {
    acc.push_back(t.accuracy);
    sr.push_back(t.fairness[0]);
  }
  CHECK(summarize(acc).mean == r.accuracy.mean);
  CHECK(summarize(sr).sd == r.fairness[0].sd);
  CHECK(r.accuracy.mean >= 0.99);
  CHECK(r.fairness[0].mean >= 0.77);
  CHECK(r.fairness[0].mean <= 0.83);
}

TEST_CASE("trial failures are recorded") {
  ExperimentConfig cfg = base(SolverKind::kErrTolerant, 0.05, 2);
  cfg.lambda_override = {0.01, 0.01};  // violates min lambda > eta + delta
  const TrialReport r = run_experiment(cfg);
  CHECK_FALSE(r.complete());
  CHECK(r.failed_trials == 2);
  REQUIRE(r.trials[0].error.has_value());
  CHECK(r.trials[0].error->find("assumption violated") != std::string::npos);
}

TEST_CASE("every adversary and solver runs") {
  for (auto adv : {AdversaryKind::kNone, AdversaryKind::kTrueNegative, AdversaryKind::kFalseNegative,
                   AdversaryKind::kFalsePositive, AdversaryKind::kFlip, AdversaryKind::kPRestricted,
                   AdversaryKind::kNasty}) {
    ExperimentConfig cfg = base(SolverKind::kErrTolerant, 0.03, 1);
    cfg.adversary = adv;
    INFO(to_string(adv));
    CHECK(run_experiment(cfg).complete());
  }
  for (auto s : {SolverKind::kUncons, SolverKind::kTargetFair, SolverKind::kGeneral, SolverKind::kReduced}) {
    ExperimentConfig cfg = base(s, 0.03, 1);
    INFO(to_string(s));
    CHECK(run_experiment(cfg).complete());
  }
  ExperimentConfig cpl = base(SolverKind::kTargetFair, 0.1, 1);
  cpl.source = DataSource::kFamilyA;
  cpl.adversary = AdversaryKind::kCoupling;
  CHECK(run_experiment(cpl).complete());

  ExperimentConfig bad = base(SolverKind::kErrTolerant, 0.1, 1);
  bad.adversary = AdversaryKind::kCoupling;
  CHECK_THROWS(run_experiment(bad));
}

TEST_CASE("tau sweep") {
  ExperimentConfig cfg = base(SolverKind::kErrTolerant, 0.0, 20);
  cfg.adversary = AdversaryKind::kNone;
  SweepGrid grid;
  grid.taus = {0.7, 0.8, 0.9, 1.0};
  const auto pts = sweep(cfg, grid);
  REQUIRE(pts.size() == 4);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].report.fairness[0].mean >= pts[i - 1].report.fairness[0].mean - 0.03);
  }
  const std::string csv = sweep_csv(pts);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK_THROWS(sweep(cfg, SweepGrid{}));
}

TEST_CASE("group-size sweep") {
  ExperimentConfig cfg = base(SolverKind::kErrTolerantPlus, 0.05, 20);
  SweepGrid grid;
  grid.group_fractions = {0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85};
  for (const auto& p : sweep(cfg, grid)) {
    INFO("fraction " << *p.group_fraction);
    CHECK(p.report.complete());
    CHECK(p.report.fairness[0].mean >= 0.75);
    CHECK(p.report.accuracy.mean >= 0.97);
  }
}

TEST_CASE("command line") {
  const fs::path dir = fs::temp_directory_path() / "fairguard_cli_test";
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };

  CHECK(cli("gen-data --out " + p("train.csv")).code == 0);
  CHECK(cli("gen-data --n 500 --data-seed 3 --out " + p("test.csv")).code == 0);
  CHECK(cli("perturb --data " + p("train.csv") + " --adversary tn --eta 0.05 --seed 1 --out " + p("noisy.csv") +
            " --record " + p("record.json"))
            .code == 0);
  const auto rec = nlohmann::json::parse(slurp(p("record.json")));
  CHECK(rec.at("flips") == 50);
  CHECK(rec.at("flip_mask").size() == 1000);

  CHECK(cli("train --data " + p("noisy.csv") + " --solver err-tol --eta 0.05 --out " + p("model.json")).code == 0);
  const Run ev = cli("evaluate --data " + p("test.csv") + " --model " + p("model.json"));
  CHECK(ev.code == 0);
  const auto evj = nlohmann::json::parse(ev.output);
  CHECK(evj.at("accuracy").get<double>() >= 0.97);

  const Run e1 = cli("experiment --trials 1 --seed 5 --out " + p("r1.json"));
  const Run e2 = cli("experiment --trials 1 --seed 5 --out " + p("r2.json"));
  CHECK(e1.code == 0);
  CHECK(slurp(p("r1.json")) == slurp(p("r2.json")));
  // Seed falls back to the environment.
  const std::string env_cmd = "env FAIRGUARD_SEED=5 " + std::string(FAIRGUARD_CLI) + " experiment --trials 1 --out " +
                              p("r3.json") + " 2>&1";
  CHECK(std::system(env_cmd.c_str()) == 0);
  CHECK(slurp(p("r1.json")) == slurp(p("r3.json")));

  const Run sw = cli("sweep --solver err-tol --trials 2 --tau-grid 0.8,0.9 --out " + p("sweep.csv"));
  CHECK(sw.code == 0);
  const std::string sweep = slurp(p("sweep.csv"));
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
  CHECK(cli("sweep --trials 2").code != 0);

  const Run good = cli("verify-theory --out " + p("theory.json"));
  CHECK(good.output.find("PASS family_b.no_good_classifier") != std::string::npos);
  CHECK(nlohmann::json::parse(slurp(p("theory.json"))).at("checks").size() >= 14);

  // Replace family A's third table with the second one's masses: classifiers
  // that are good on D1 and D2 become counterexamples.
  const nlohmann::json corrupt{{"mass_overrides", {{"A3", build_family_a(0.3, 0.1)[1].mass()}}}};
  std::ofstream(p("corrupt.json")) << corrupt.dump();
  const Run bad = cli("verify-theory --params " + p("corrupt.json") + " --out " + p("theory.json"));
  CHECK(bad.code == 1);
  CHECK(bad.output.find("FAIL family_a.no_good_classifier") != std::string::npos);
  CHECK(bad.output.find("violating classifier: A1=") != std::string::npos);

  fs::remove_all(dir);
}
