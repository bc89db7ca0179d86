#include "strucsim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "strucsim/error.hpp"
#include "strucsim/hash.hpp"

namespace strucsim {

std::span<const int> Dataset::label_span() const {
  if (!labels) throw InputError("dataset '" + name + "' has no labels");
  return {labels->data(), labels->size()};
}

std::string Dataset::fingerprint() const { return matrix_fingerprint(points); }

void Dataset::validate() const {
  if (!points.allFinite()) throw InputError("dataset '" + name + "' contains NaN or Inf entries");
  if (labels && static_cast<Eigen::Index>(labels->size()) != size()) {
    throw InputError("dataset '" + name + "': label count does not match observation count");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.name = name;
  out.label_names = label_names;
  out.points.resize(points.rows(), static_cast<Eigen::Index>(indices.size()));
  if (labels) out.labels.emplace();
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(indices[c]);
    if (i < 0 || i >= size()) throw InputError("subset index out of range");
    out.points.col(static_cast<Eigen::Index>(c)) = points.col(i);
    if (labels) out.labels->push_back((*labels)[indices[c]]);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string where(const std::string& name, std::size_t line) { return name + ":" + std::to_string(line) + ": "; }

}  // namespace

Dataset parse_csv(std::istream& in, const CsvOptions& options, std::string name) {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (options.has_header && header.empty()) {
      header = split_row(line);
      continue;
    }
    rows.push_back(split_row(line));
    row_lines.push_back(line_no);
  }
  if (rows.empty()) throw InputError(name + ": file contains no data rows");

  const std::size_t width = rows.front().size();
  if (!header.empty() && header.size() != width) {
    throw InputError(where(name, row_lines.front()) + "header has " + std::to_string(header.size()) +
                     " columns but data rows have " + std::to_string(width));
  }

  std::optional<std::size_t> label_col;
  if (options.label_column) {
    if (const auto* idx = std::get_if<int>(&*options.label_column)) {
      const long resolved = *idx < 0 ? static_cast<long>(width) + *idx : *idx;
      if (resolved < 0 || resolved >= static_cast<long>(width)) {
        throw InputError(name + ": label column index " + std::to_string(*idx) + " out of range");
      }
      label_col = static_cast<std::size_t>(resolved);
    } else {
      const auto& wanted = std::get<std::string>(*options.label_column);
      if (header.empty()) throw InputError(name + ": label column given by name but the file has no header");
      const auto it = std::find(header.begin(), header.end(), wanted);
      if (it == header.end()) throw InputError(name + ": no column named '" + wanted + "'");
      label_col = static_cast<std::size_t>(it - header.begin());
    }
  }

  const std::size_t dim = width - (label_col ? 1 : 0);
  if (dim == 0) throw InputError(name + ": no feature columns");
  Dataset data;
  data.name = std::move(name);
  data.points.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
  std::vector<std::string> raw_labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != width) {
      throw InputError(where(data.name, row_lines[r]) + "expected " + std::to_string(width) + " columns, found " +
                       std::to_string(cells.size()));
    }
    Eigen::Index feature = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (label_col && c == *label_col) {
        raw_labels.push_back(cells[c]);
        continue;
      }
      const std::string& cell = cells[c];
      double value = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      if (!cell.empty() && *begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (cell.empty() || ec != std::errc() || ptr != end) {
        throw InputError(where(data.name, row_lines[r]) + "column " + std::to_string(c + 1) + ": '" + cell +
                         "' is not a number");
      }
      if (!std::isfinite(value)) {
        throw InputError(where(data.name, row_lines[r]) + "column " + std::to_string(c + 1) + ": non-finite value");
      }
      data.points(feature++, static_cast<Eigen::Index>(r)) = value;
    }
  }

  if (label_col) {
    std::map<std::string, int> ids;
    for (const auto& l : raw_labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [text, id] : ids) {
      id = next++;
      data.label_names.push_back(text);
    }
    data.labels.emplace();
    for (const auto& l : raw_labels) data.labels->push_back(ids.at(l));
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_csv(in, options, path.filename().string());
}

Dataset gen_line_circle(int n_per_class, double noise_std, std::uint64_t seed, const LineCircleGeometry& g) {
  if (n_per_class < 1) throw InputError("gen_line_circle: n_per_class must be >= 1");
  if (!(noise_std >= 0.0)) throw InputError("gen_line_circle: noise_std must be nonnegative");
  Rng rng(seed);
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(n_per_class);
  Dataset data;
  data.name = "line_circle";
  data.points.resize(2, n);
  data.labels.emplace(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n_per_class; ++i) {
    data.points(0, i) = rng.uniform(g.line_x_min, g.line_x_max);
    data.points(1, i) = g.line_y;
  }
  for (Eigen::Index i = n_per_class; i < n; ++i) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    data.points(0, i) = g.circle_center_x + g.circle_radius * std::cos(angle);
    data.points(1, i) = g.circle_center_y + g.circle_radius * std::sin(angle);
    (*data.labels)[static_cast<std::size_t>(i)] = 1;
  }
  if (noise_std > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      data.points(0, i) += rng.normal(0.0, noise_std);
      data.points(1, i) += rng.normal(0.0, noise_std);
    }
  }
  data.label_names = {"line", "circle"};
  return data;
}

Eigen::MatrixXd sample_clusters_nominal(Eigen::Index n, Rng& rng, const ClustersGeometry& g) {
  Eigen::MatrixXd out(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool first = rng.uniform() < 0.5;
    const double mx = first ? g.first_mean_x : g.second_mean_x;
    const double my = first ? g.first_mean_y : g.second_mean_y;
    const double sd = first ? g.first_std : g.second_std;
    out(0, i) = rng.normal(mx, sd);
    out(1, i) = rng.normal(my, sd);
  }
  return out;
}

Eigen::MatrixXd sample_clusters_anomalous(Eigen::Index n, Rng& rng, const ClustersGeometry& g) {
  const double reach1 = g.box_sigmas * g.first_std;
  const double reach2 = g.box_sigmas * g.second_std;
  const double x_lo = std::min(g.first_mean_x - reach1, g.second_mean_x - reach2);
  const double x_hi = std::max(g.first_mean_x + reach1, g.second_mean_x + reach2);
  const double y_lo = std::min(g.first_mean_y - reach1, g.second_mean_y - reach2);
  const double y_hi = std::max(g.first_mean_y + reach1, g.second_mean_y + reach2);
  Eigen::MatrixXd out(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(0, i) = rng.uniform(x_lo, x_hi);
    out(1, i) = rng.uniform(y_lo, y_hi);
  }
  return out;
}

namespace {

void check_counts(const AnomalyCounts& c) {
  if (c.train < 1 || c.nominal_test < 0 || c.anomalous_test < 0 || c.nominal_test + c.anomalous_test < 1) {
    throw InputError("anomaly generator: counts must be positive");
  }
}

Dataset make_test(const Eigen::MatrixXd& nominal, const Eigen::MatrixXd& anomalous, std::string name) {
  Dataset test;
  test.name = std::move(name);
  test.points.resize(nominal.rows(), nominal.cols() + anomalous.cols());
  test.points << nominal, anomalous;
  test.labels.emplace(static_cast<std::size_t>(nominal.cols()), 0);
  test.labels->resize(static_cast<std::size_t>(test.points.cols()), 1);
  test.label_names = {"nominal", "anomalous"};
  return test;
}

}  // namespace

AnomalyData gen_clusters(std::uint64_t seed, const AnomalyCounts& counts, const ClustersGeometry& g) {
  check_counts(counts);
  Rng rng(seed);
  AnomalyData out;
  out.train.name = "clusters";
  out.train.points = sample_clusters_nominal(counts.train, rng, g);
  const Eigen::MatrixXd nominal = sample_clusters_nominal(counts.nominal_test, rng, g);
  const Eigen::MatrixXd anomalous = sample_clusters_anomalous(counts.anomalous_test, rng, g);
  out.test = make_test(nominal, anomalous, "clusters");
  return out;
}

AnomalyData gen_linear_subspace(std::uint64_t seed, const LinearSubspaceParams& p, const AnomalyCounts& counts) {
  check_counts(counts);
  if (p.ambient_dim < 3 || p.subspace_dim < 1 || p.subspace_dim >= p.ambient_dim) {
    throw InputError("gen_linear_subspace: need ambient_dim >= 3 and 1 <= subspace_dim < ambient_dim");
  }
  if (!(p.nominal_std >= 0.0) || !(p.anomalous_std >= 0.0)) {
    throw InputError("gen_linear_subspace: perturbation scales must be nonnegative");
  }
  Rng rng(seed);
  Eigen::MatrixXd raw(p.ambient_dim, p.subspace_dim);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, j) = rng.normal();
  }
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
                                Eigen::MatrixXd::Identity(p.ambient_dim, p.subspace_dim);

  auto draw = [&](Eigen::Index n, double perturbation) {
    Eigen::MatrixXd pts(p.ambient_dim, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd coeff(p.subspace_dim);
      for (Eigen::Index c = 0; c < coeff.size(); ++c) coeff(c) = rng.normal(0.0, p.coefficient_std);
      pts.col(i) = basis * coeff;
      if (perturbation > 0.0) {
        for (Eigen::Index r = 0; r < pts.rows(); ++r) pts(r, i) += rng.normal(0.0, perturbation);
      }
    }
    return pts;
  };

  AnomalyData out;
  out.train.name = "linear_subspace";
  out.train.points = draw(counts.train, p.nominal_std);
  const Eigen::MatrixXd nominal = draw(counts.nominal_test, p.nominal_std);
  const Eigen::MatrixXd anomalous = draw(counts.anomalous_test, p.anomalous_std);
  out.test = make_test(nominal, anomalous, "linear_subspace");
  return out;
}

Dataset gen_independent_subspaces(int ambient_dim, std::span<const int> ranks, int points_per_block,
                                  std::uint64_t seed) {
  int total = 0;
  for (int r : ranks) {
    if (r < 1) throw InputError("gen_independent_subspaces: ranks must be >= 1");
    total += r;
  }
  if (ranks.empty() || total > ambient_dim) {
    throw InputError("gen_independent_subspaces: ranks must be nonempty and sum to at most ambient_dim");
  }
  if (points_per_block < 1) throw InputError("gen_independent_subspaces: points_per_block must be >= 1");
  Rng rng(seed);
  Dataset data;
  data.name = "independent_subspaces";
  data.points.resize(ambient_dim, static_cast<Eigen::Index>(ranks.size()) * points_per_block);
  std::vector<int> labels;
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < ranks.size(); ++b) {
    Eigen::MatrixXd basis(ambient_dim, ranks[b]);
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
      for (Eigen::Index i = 0; i < basis.rows(); ++i) basis(i, j) = rng.normal();
    }
    for (int p = 0; p < points_per_block; ++p) {
      Eigen::VectorXd coeff(ranks[b]);
      for (Eigen::Index c = 0; c < coeff.size(); ++c) coeff(c) = rng.normal();
      data.points.col(col++) = basis * coeff;
      labels.push_back(static_cast<int>(b));
    }
  }
  data.labels = std::move(labels);
  return data;
}

int ionosphere_nominal_label(const Dataset& data) {
  const auto labels = data.label_span();
  const auto named = std::find(data.label_names.begin(), data.label_names.end(), "g");
  if (named != data.label_names.end()) return static_cast<int>(named - data.label_names.begin());
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  return std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
           return a.second < b.second;
         })->first;
}

SplitPlan split_nominal(const Dataset& data, int nominal_label, std::uint64_t seed,
                        const IonosphereSplitCounts& counts) {
  if (!data.has_labels()) throw InputError("split_nominal: dataset has no labels");
  if (counts.nominal_train < 1 || counts.nominal_test < 0 || counts.anomalous_test < 0 ||
      counts.nominal_test + counts.anomalous_test < 1) {
    throw InputError("split_nominal: counts must give a nonempty training and test set");
  }
  const auto labels = data.label_span();
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == nominal_label ? good : bad).push_back(i);
  if (static_cast<int>(good.size()) < counts.nominal_train + counts.nominal_test ||
      static_cast<int>(bad.size()) < counts.anomalous_test) {
    throw InputError("split_nominal: not enough observations for the requested counts");
  }

  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(good));
  rng.shuffle(std::span<std::size_t>(bad));
  SplitPlan plan;
  plan.seed = seed;
  plan.nominal_train = counts.nominal_train;
  plan.nominal_test = counts.nominal_test;
  plan.anomalous_test = counts.anomalous_test;
  plan.train.assign(good.begin(), good.begin() + counts.nominal_train);
  for (int i = 0; i < counts.nominal_test; ++i) {
    plan.test.push_back(good[static_cast<std::size_t>(counts.nominal_train + i)]);
    plan.test_anomalous.push_back(0);
  }
  for (int i = 0; i < counts.anomalous_test; ++i) {
    plan.test.push_back(bad[static_cast<std::size_t>(i)]);
    plan.test_anomalous.push_back(1);
  }
  return plan;
}

SplitPlan split_ionosphere(const Dataset& data, std::uint64_t seed, const IonosphereSplitCounts& counts) {
  if (data.size() != 351 || data.dimension() != 34 || !data.has_labels()) {
    throw InputError("split_ionosphere: expected 351 labelled observations of dimension 34");
  }
  std::map<int, int> classes;
  for (int l : data.label_span()) ++classes[l];
  if (classes.size() != 2) throw InputError("split_ionosphere: expected exactly two classes");
  return split_nominal(data, ionosphere_nominal_label(data), seed, counts);
}

}  // namespace strucsim
