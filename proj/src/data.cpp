#include "fairguard/data.hpp"

#include "fairguard/rng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fairguard {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::optional<double> parse_double(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("failed to format a double");
  return {buf, ptr};
}

std::size_t train_count(double f, std::size_t n) {
  return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
}

bool both_cover(const Dataset& d, const std::vector<std::size_t>& train,
                const std::vector<std::size_t>& test) {
  std::vector<bool> a(static_cast<std::size_t>(d.num_groups()), false);
  std::vector<bool> b = a;
  for (auto i : train) a[static_cast<std::size_t>(d.group(i) - 1)] = true;
  for (auto i : test) b[static_cast<std::size_t>(d.group(i) - 1)] = true;
  return std::all_of(a.begin(), a.end(), [](bool v) { return v; }) &&
         std::all_of(b.begin(), b.end(), [](bool v) { return v; });
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n == 0) throw std::invalid_argument("n must be positive");
  if (group_fractions.size() < 2) throw std::invalid_argument("need at least two groups");
  double total = 0.0;
  for (double f : group_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("group fractions must lie in (0, 1)");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("group fractions must sum to 1");
  if (positive_rates.size() != group_fractions.size() ||
      cluster_means.size() != group_fractions.size()) {
    throw std::invalid_argument("positive rates and cluster means need one entry per group");
  }
  for (double r : positive_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("positive rates must lie in [0, 1]");
  }
  if (!(cluster_cov_scale > 0.0)) throw std::invalid_argument("covariance scale must be positive");
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(wsum > 0.0)) throw std::invalid_argument("weights must have positive sum");
  std::vector<std::size_t> out(weights.size());
  std::vector<double> rem(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double share = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<std::size_t>(std::floor(share + 1e-9));
    rem[i] = share - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size(), ++assigned) ++out[order[k]];
  return out;
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sd = std::sqrt(cfg.cluster_cov_scale);
  const auto counts = apportion(cfg.n, cfg.group_fractions);

  Eigen::MatrixXd features(static_cast<Eigen::Index>(cfg.n), 2);
  std::vector<int> labels;
  std::vector<int> groups;
  labels.reserve(cfg.n);
  groups.reserve(cfg.n);
  for (std::size_t g = 0; g < counts.size(); ++g) {
    std::vector<int> ys(counts[g], 0);
    if (cfg.exact_label_counts) {
      const auto pos = static_cast<std::size_t>(
          std::llround(static_cast<double>(counts[g]) * cfg.positive_rates[g]));
      std::fill(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(pos), 1);
      std::shuffle(ys.begin(), ys.end(), rng);
    } else {
      for (auto& y : ys) y = unif(rng) < cfg.positive_rates[g] ? 1 : 0;
    }
    for (int y : ys) {
      const auto row = static_cast<Eigen::Index>(labels.size());
      const auto& mean = cfg.cluster_means[g][static_cast<std::size_t>(y)];
      features(row, 0) = mean[0] + sd * gauss(rng);
      features(row, 1) = mean[1] + sd * gauss(rng);
      labels.push_back(y);
      groups.push_back(static_cast<int>(g) + 1);
    }
  }
  return Dataset(std::move(features), std::move(labels), std::move(groups),
                 static_cast<int>(counts.size()));
}

CsvData load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& group_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' has no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  const auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = find_col(label_column);
  const std::size_t group_col = find_col(group_column);
  if (label_col == group_col) throw std::invalid_argument("label and group columns coincide");

  CsvData out;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_col && c != group_col) {
      feature_cols.push_back(c);
      out.feature_names.push_back(header[c]);
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> raw_groups;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (auto c : feature_cols) {
      const auto v = parse_double(fields[c]);
      if (!v) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": column '" + header[c] +
                                    "' is not numeric: '" + fields[c] + "'");
      }
      row.push_back(*v);
    }
    const auto y = parse_double(fields[label_col]);
    if (!y || (*y != 0.0 && *y != 1.0)) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": label must be 0 or 1, got '" +
                                  fields[label_col] + "'");
    }
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(*y));
    raw_groups.push_back(trim(fields[group_col]));
  }
  if (rows.empty()) throw std::invalid_argument("'" + path.string() + "' has no data rows");

  std::set<std::string> distinct(raw_groups.begin(), raw_groups.end());
  if (distinct.size() < 2) throw std::invalid_argument("group column has a single group");
  out.group_codes.assign(distinct.begin(), distinct.end());
  const bool numeric = std::all_of(out.group_codes.begin(), out.group_codes.end(),
                                   [](const std::string& s) { return parse_double(s).has_value(); });
  if (numeric) {
    std::stable_sort(out.group_codes.begin(), out.group_codes.end(),
                     [](const std::string& a, const std::string& b) {
                       return *parse_double(a) < *parse_double(b);
                     });
  }
  std::map<std::string, int> code_to_group;
  for (std::size_t g = 0; g < out.group_codes.size(); ++g) {
    code_to_group[out.group_codes[g]] = static_cast<int>(g) + 1;
  }

  Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(feature_cols.size()));
  std::vector<int> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    groups.push_back(code_to_group.at(raw_groups[i]));
  }
  out.dataset = Dataset(std::move(features), std::move(labels), std::move(groups),
                        static_cast<int>(out.group_codes.size()));
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::vector<std::string>& feature_names) {
  if (!feature_names.empty() && static_cast<int>(feature_names.size()) != dataset.dim()) {
    throw std::invalid_argument("feature_names length does not match the feature dimension");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (int j = 0; j < dataset.dim(); ++j) {
    out << (feature_names.empty() ? "x" + std::to_string(j + 1) : feature_names[static_cast<std::size_t>(j)])
        << ',';
  }
  out << "label,group\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (int j = 0; j < dataset.dim(); ++j) {
      out << format_double(dataset.features()(static_cast<Eigen::Index>(i), j)) << ',';
    }
    out << dataset.label(i) << ',' << dataset.group(i) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed, bool stratify) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const std::size_t n_train = train_count(train_fraction, n);
  if (n_train == 0 || n_train == n) throw std::invalid_argument("split leaves one side empty");
  auto rng = make_rng(seed);

  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  if (stratify) {
    const auto p = static_cast<std::size_t>(dataset.num_groups());
    std::vector<std::vector<std::size_t>> cells(2 * p);
    for (std::size_t i = 0; i < n; ++i) {
      cells[2 * static_cast<std::size_t>(dataset.group(i) - 1) + static_cast<std::size_t>(dataset.label(i))]
          .push_back(i);
    }
    std::vector<double> sizes;
    for (const auto& c : cells) sizes.push_back(static_cast<double>(c.size()));
    const auto take = apportion(n_train, sizes);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::shuffle(cells[c].begin(), cells[c].end(), rng);
      train.insert(train.end(), cells[c].begin(), cells[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
      test.insert(test.end(), cells[c].begin() + static_cast<std::ptrdiff_t>(take[c]), cells[c].end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    if (!both_cover(dataset, train, test)) {
      throw std::invalid_argument("stratified split cannot place every group on both sides");
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      std::shuffle(order.begin(), order.end(), rng);
      train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
      test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
      ok = both_cover(dataset, train, test);
    }
    if (!ok) throw std::invalid_argument("no split places every group on both sides");
  }
  return {dataset.subset(train), dataset.subset(test)};
}

}  // namespace fairguard
