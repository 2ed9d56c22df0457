#include "fairguard/adversaries.hpp"

#include "fairguard/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairguard {
namespace {

constexpr double kCountSlack = 1e-9;

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
}

void check_group(const Dataset& dataset, int g, const char* what) {
  if (g < 1 || g > dataset.num_groups()) {
    throw std::invalid_argument(std::string(what) + " group " + std::to_string(g) +
                                " outside [1, " + std::to_string(dataset.num_groups()) + "]");
  }
}

bool outcome_matches(TargetOutcome outcome, int pred, int label) {
  switch (outcome) {
    case TargetOutcome::kTrueNegative: return pred == 0 && label == 0;
    case TargetOutcome::kFalseNegative: return pred == 0 && label == 1;
    case TargetOutcome::kFalsePositive: return pred == 1 && label == 0;
  }
  return false;
}

// Candidates ordered by decreasing |margin|, lower index first on ties.
std::vector<std::size_t> furthest_first(std::vector<std::size_t> candidates,
                                        const Eigen::VectorXd& margins) {
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(margins[static_cast<Eigen::Index>(a)]) >
           std::abs(margins[static_cast<Eigen::Index>(b)]);
  });
  return candidates;
}

}  // namespace

std::size_t PerturbationRecord::flips() const {
  return static_cast<std::size_t>(std::count(flip_mask.begin(), flip_mask.end(), true));
}

FlipMatrix::FlipMatrix(Eigen::MatrixXd p) : p_(std::move(p)) {
  if (p_.rows() == 0 || p_.rows() != p_.cols()) {
    throw std::invalid_argument("flip matrix must be square and nonempty");
  }
  for (Eigen::Index r = 0; r < p_.rows(); ++r) {
    for (Eigen::Index c = 0; c < p_.cols(); ++c) {
      if (!(p_(r, c) >= 0.0 && p_(r, c) <= 1.0)) {
        throw std::invalid_argument("flip matrix entries must lie in [0, 1]");
      }
    }
    if (std::abs(p_.row(r).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("flip matrix row " + std::to_string(r + 1) +
                                  " does not sum to 1");
    }
  }
}

double FlipMatrix::off_diagonal_budget() const {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < p_.rows(); ++r) worst = std::max(worst, p_.row(r).sum() - p_(r, r));
  return worst;
}

std::size_t budget_count(double eta, std::size_t n) {
  const double raw = eta * static_cast<double>(n);
  return static_cast<std::size_t>(std::max(0.0, std::ceil(raw - kCountSlack)));
}

std::string to_string(TargetOutcome outcome) {
  switch (outcome) {
    case TargetOutcome::kTrueNegative: return "tn";
    case TargetOutcome::kFalseNegative: return "fn";
    case TargetOutcome::kFalsePositive: return "fp";
  }
  return "unknown";
}

PerturbationRecord perturb_targeted(const Dataset& dataset, double eta, TargetOutcome outcome,
                                    const LinearClassifier& fstar, int source_group,
                                    int target_group, std::uint64_t seed) {
  check_eta(eta);
  check_group(dataset, source_group, "source");
  check_group(dataset, target_group, "target");
  if (source_group == target_group) {
    throw std::invalid_argument("source and target groups must differ");
  }

  const Eigen::VectorXd margins = fstar.margins(dataset);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int pred = margins[static_cast<Eigen::Index>(i)] >= 0.0 ? 1 : 0;
    if (dataset.group(i) == source_group && outcome_matches(outcome, pred, dataset.label(i))) {
      candidates.push_back(i);
    }
  }
  candidates = furthest_first(std::move(candidates), margins);

  PerturbationRecord rec;
  rec.budget = budget_count(eta, dataset.size());
  rec.budget_eta = eta;
  rec.kind = to_string(outcome);
  rec.rng_seed = seed;
  rec.flip_mask.assign(dataset.size(), false);
  std::vector<int> groups = dataset.groups();
  const auto take = std::min(rec.budget, candidates.size());
  for (std::size_t r = 0; r < take; ++r) {
    groups[candidates[r]] = target_group;
    rec.flip_mask[candidates[r]] = true;
  }
  rec.perturbed = dataset.with_groups(std::move(groups));
  return rec;
}

PerturbationRecord perturb_flip(const Dataset& dataset, const std::vector<double>& rates,
                                std::uint64_t seed) {
  if (dataset.num_groups() != 2) throw std::invalid_argument("flip noise requires p = 2");
  if (rates.size() != 2) throw std::invalid_argument("flip noise needs one rate per group");
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("flip rates must lie in [0, 1]");
  }
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PerturbationRecord rec;
  rec.budget = dataset.size();
  rec.budget_eta = std::max(rates[0], rates[1]);
  rec.kind = "flip";
  rec.rng_seed = seed;
  rec.flip_mask.assign(dataset.size(), false);
  std::vector<int> groups = dataset.groups();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double u = unif(rng);
    if (u < rates[static_cast<std::size_t>(groups[i] - 1)]) {
      groups[i] = 3 - groups[i];
      rec.flip_mask[i] = true;
    }
  }
  rec.perturbed = dataset.with_groups(std::move(groups));
  return rec;
}

PerturbationRecord perturb_p_restricted(const Dataset& dataset, const FlipMatrix& flips,
                                        std::uint64_t seed) {
  const int p = dataset.num_groups();
  if (flips.num_groups() != p) {
    throw std::invalid_argument("flip matrix size does not match the number of groups");
  }
  auto rng = make_rng(seed);

  PerturbationRecord rec;
  rec.budget_eta = flips.off_diagonal_budget();
  rec.budget = budget_count(rec.budget_eta, dataset.size());
  rec.kind = "prh";
  rec.rng_seed = seed;
  rec.flip_mask.assign(dataset.size(), false);
  std::vector<int> groups = dataset.groups();

  for (int from = 1; from <= p; ++from) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.group(i) == from) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t cursor = 0;
    for (int to = 1; to <= p; ++to) {
      if (to == from) continue;
      const double raw = flips.matrix()(from - 1, to - 1) * static_cast<double>(members.size());
      const auto count = static_cast<std::size_t>(std::floor(raw + kCountSlack));
      for (std::size_t r = 0; r < count && cursor < members.size(); ++r, ++cursor) {
        groups[members[cursor]] = to;
        rec.flip_mask[members[cursor]] = true;
      }
    }
  }
  rec.perturbed = dataset.with_groups(std::move(groups));
  return rec;
}

int one_hot_index(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int hot = -1;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (row[j] == 1.0) {
      if (hot >= 0) throw std::invalid_argument("feature row is not one-hot");
      hot = static_cast<int>(j);
    } else if (row[j] != 0.0) {
      throw std::invalid_argument("feature row is not one-hot");
    }
  }
  if (hot < 0) throw std::invalid_argument("feature row is not one-hot");
  return hot;
}

PerturbationRecord perturb_tv_coupling(const Dataset& dataset, const FiniteDistribution& source,
                                       const FiniteDistribution& target, double eta,
                                       std::uint64_t seed) {
  check_eta(eta);
  if (source.x_ids() != target.x_ids() || source.num_groups() != 2 || target.num_groups() != 2) {
    throw std::invalid_argument("coupling needs two-group distributions on the same domain");
  }
  if (dataset.num_groups() != 2 ||
      dataset.dim() != static_cast<int>(source.x_ids().size())) {
    throw std::invalid_argument("dataset does not live on the distributions' domain");
  }
  const int nx = static_cast<int>(source.x_ids().size());
  for (int x = 0; x < nx; ++x) {
    if (std::abs(source.x_mass(x) - target.x_mass(x)) > 1e-9) {
      throw std::invalid_argument("source and target X-marginals differ at '" +
                                  source.x_ids()[static_cast<std::size_t>(x)] + "'");
    }
  }

  // keep[x][z-1] = min(Q(x,z) / P(x,z), 1)
  std::vector<std::array<double, 2>> keep(static_cast<std::size_t>(nx));
  for (int x = 0; x < nx; ++x) {
    for (int z = 1; z <= 2; ++z) {
      const double pm = source.xz_mass(x, z);
      keep[static_cast<std::size_t>(x)][static_cast<std::size_t>(z - 1)] =
          pm > 0.0 ? std::min(target.xz_mass(x, z) / pm, 1.0) : 1.0;
    }
  }

  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> groups = dataset.groups();
  std::vector<bool> mask(dataset.size(), false);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int x = one_hot_index(dataset.features().row(static_cast<Eigen::Index>(i)));
    const double t = unif(rng);
    if (t > keep[static_cast<std::size_t>(x)][static_cast<std::size_t>(groups[i] - 1)]) {
      groups[i] = 3 - groups[i];
      mask[i] = true;
      ++flipped;
    }
  }

  PerturbationRecord rec;
  rec.budget_eta = eta;
  rec.budget = budget_count(eta, dataset.size());
  rec.kind = "coupling";
  rec.rng_seed = seed;
  if (static_cast<double>(flipped) < eta * static_cast<double>(dataset.size())) {
    rec.flip_mask = std::move(mask);
    rec.perturbed = dataset.with_groups(std::move(groups));
  } else {
    rec.flip_mask.assign(dataset.size(), false);
    rec.perturbed = dataset;
    rec.budget_exceeded = true;
  }
  return rec;
}

PerturbationRecord perturb_nasty_labels(const Dataset& dataset, double eta,
                                        const LinearClassifier& fstar, std::uint64_t seed) {
  check_eta(eta);
  const Eigen::VectorXd margins = fstar.margins(dataset);
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int pred = margins[static_cast<Eigen::Index>(i)] >= 0.0 ? 1 : 0;
    if (pred == dataset.label(i)) correct.push_back(i);
  }
  correct = furthest_first(std::move(correct), margins);

  PerturbationRecord rec;
  rec.budget = budget_count(eta, dataset.size());
  rec.budget_eta = eta;
  rec.kind = "nasty";
  rec.rng_seed = seed;
  rec.flip_mask.assign(dataset.size(), false);
  std::vector<int> labels = dataset.labels();
  const auto take = std::min(rec.budget, correct.size());
  for (std::size_t r = 0; r < take; ++r) {
    labels[correct[r]] = 1 - labels[correct[r]];
    rec.flip_mask[correct[r]] = true;
  }
  rec.perturbed = dataset.with_labels(std::move(labels));
  return rec;
}

}  // namespace fairguard
