#include <algorithm>
#include <cmath>
#include <limits>

#include "strucsim/cli.hpp"
#include "strucsim/error.hpp"
#include "strucsim/hash.hpp"

namespace strucsim::cli {

using nlohmann::json;

namespace {

/// Reads fields of one JSON object; finish() rejects whatever was not read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string field(const char* key) const { return path_ + "." + key; }

  const json* child(const char* key) {
    seen_.emplace_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  int integer(const char* key, int fallback, int lo, int hi) {
    const json* v = child(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw InputError(field(key) + ": expected an integer");
    const auto x = v->get<std::int64_t>();
    if (x < lo || x > hi) {
      throw InputError(field(key) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<int>(x);
  }

  double number(const char* key, double fallback, double lo, double hi, bool open_lo = false) {
    const json* v = child(key);
    if (!v) return fallback;
    if (!v->is_number()) throw InputError(field(key) + ": expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || x > hi || x < lo || (open_lo && x == lo)) {
      throw InputError(field(key) + ": out of range");
    }
    return x;
  }

  std::optional<double> optional_number(const char* key, double lo, double hi, bool open_lo) {
    if (!has(key)) {
      child(key);
      return std::nullopt;
    }
    return number(key, 0.0, lo, hi, open_lo);
  }

  /// A positive number, or the string "median" (returned as nullopt).
  std::optional<double> bandwidth(const char* key) {
    const json* v = child(key);
    if (!v) return std::nullopt;
    if (v->is_string()) {
      if (v->get<std::string>() != "median") throw InputError(field(key) + ": expected a number or \"median\"");
      return std::nullopt;
    }
    if (!v->is_number() || !(v->get<double>() > 0.0) || !std::isfinite(v->get<double>())) {
      throw InputError(field(key) + ": expected a positive number");
    }
    return v->get<double>();
  }

  std::string text(const char* key, const std::string& fallback) {
    const json* v = child(key);
    if (!v) return fallback;
    if (!v->is_string()) throw InputError(field(key) + ": expected a string");
    return v->get<std::string>();
  }

  bool flag(const char* key, bool fallback) {
    const json* v = child(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw InputError(field(key) + ": expected true or false");
    return v->get<bool>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw InputError(path_ + "." + key + ": unknown field");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

constexpr int kMaxInt = std::numeric_limits<int>::max();

void read_counts(ObjectReader& r, AnomalyCounts& counts) {
  counts.train = r.integer("nominal_train", counts.train, 1, 1000000);
  counts.nominal_test = r.integer("nominal_test", counts.nominal_test, 0, 1000000);
  counts.anomalous_test = r.integer("anomalous_test", counts.anomalous_test, 0, 1000000);
}

DatasetConfig parse_dataset(const json& j) {
  ObjectReader r(j, "dataset");
  DatasetConfig d;
  d.source = r.text("source", "");
  if (d.source == "csv") {
    const std::string path = r.text("path", "");
    if (path.empty()) throw InputError("dataset.path: required for csv datasets");
    d.path = path;
    if (!std::filesystem::is_regular_file(d.path)) throw InputError("dataset.path: file not found: " + path);
    d.has_header = r.flag("has_header", false);
    if (const json* v = r.child("label_column")) {
      if (v->is_number_integer()) {
        d.label_column = v->get<int>();
      } else if (v->is_string()) {
        if (!d.has_header) throw InputError("dataset.label_column: a column name needs has_header = true");
        d.label_column = v->get<std::string>();
      } else {
        throw InputError("dataset.label_column: expected an integer index or a column name");
      }
    }
    d.name = r.text("name", d.path.stem().string());
    if (r.has("nominal_label")) d.nominal_label = r.text("nominal_label", "");
    d.split_counts.nominal_train = r.integer("nominal_train", d.split_counts.nominal_train, 1, kMaxInt);
    d.split_counts.nominal_test = r.integer("nominal_test", d.split_counts.nominal_test, 0, kMaxInt);
    d.split_counts.anomalous_test = r.integer("anomalous_test", d.split_counts.anomalous_test, 0, kMaxInt);
  } else if (d.source == "line_circle") {
    d.n_per_class = r.integer("n_per_class", d.n_per_class, 1, 1000000);
    d.noise_std = r.optional_number("noise_std", 0.0, 1e6, false);
    d.name = r.text("name", "line_circle");
  } else if (d.source == "clusters") {
    read_counts(r, d.counts);
    d.name = r.text("name", "clusters");
  } else if (d.source == "linear_subspace") {
    d.subspace.ambient_dim = r.integer("ambient_dim", d.subspace.ambient_dim, 3, 10000);
    d.subspace.subspace_dim = r.integer("subspace_dim", d.subspace.subspace_dim, 1, 2);
    d.subspace.nominal_std = r.number("nominal_std", d.subspace.nominal_std, 0.0, 1e6);
    d.subspace.anomalous_std = r.number("anomalous_std", d.subspace.anomalous_std, 0.0, 1e6);
    read_counts(r, d.counts);
    d.name = r.text("name", "linear_subspace");
  } else {
    throw InputError("dataset.source: expected csv, line_circle, clusters or linear_subspace");
  }
  r.finish();
  return d;
}

LambdaRule parse_lambda(const json& j) {
  ObjectReader r(j, "lambda");
  const std::string rule = r.text("rule", "relative");
  const double value = r.number("value", 0.1, 0.0, std::numeric_limits<double>::max());
  r.finish();
  if (rule == "relative") {
    if (value >= 1.0) throw InputError("lambda.value: a relative lambda must lie in [0, 1)");
    return LambdaRule::relative(value);
  }
  if (rule == "absolute") return LambdaRule::absolute(value);
  throw InputError("lambda.rule: expected relative or absolute");
}

void check_kernel_shape(const json& j, const std::string& path, int depth) {
  if (depth > KernelSpec::kMaxDepth) throw InputError(path + ": product kernel nesting exceeds depth 8");
  ObjectReader r(j, path);
  const std::string type = r.text("type", "");
  if (type == "linear") {
  } else if (type == "rbf") {
    if (!r.has("bandwidth")) throw InputError(r.field("bandwidth") + ": missing");
    r.bandwidth("bandwidth");
  } else if (type == "poly") {
    r.integer("degree", 3, 1, 64);
    r.number("offset", 1.0, 0.0, std::numeric_limits<double>::max());
  } else if (type == "product") {
    const json* left = r.child("left");
    const json* right = r.child("right");
    if (!left || !right) throw InputError(path + ": product needs left and right");
    check_kernel_shape(*left, path + ".left", depth + 1);
    check_kernel_shape(*right, path + ".right", depth + 1);
  } else {
    throw InputError(path + ".type: expected linear, rbf, poly or product");
  }
  r.finish();
}

}  // namespace

std::string config_hash(const json& effective) {
  json copy = effective;
  copy.erase("output");
  return text_fingerprint(copy.dump());
}

RunConfig parse_config(const json& j, const std::string& experiment) {
  ObjectReader r(j, "config");
  RunConfig c;
  c.experiment = r.text("experiment", experiment);
  if (c.experiment != experiment) {
    throw InputError("config.experiment: '" + c.experiment + "' does not match the '" + experiment + "' command");
  }
  if (const json* v = r.child("seed")) {
    if (!v->is_number_unsigned()) throw InputError("config.seed: expected a nonnegative integer");
    c.seed = v->get<std::uint64_t>();
  }
  c.output = r.text("output", "out");
  if (const json* v = r.child("dataset")) c.dataset = parse_dataset(*v);
  if (!c.dataset && experiment != "bench") throw InputError("config.dataset: required for " + experiment);
  c.kernel = json{{"type", "rbf"}, {"bandwidth", "median"}};
  if (const json* v = r.child("kernel")) c.kernel = *v;
  check_kernel_shape(c.kernel, "kernel", 1);
  if (const json* v = r.child("lambda")) c.lambda = parse_lambda(*v);

  if (const json* v = r.child("fit")) ObjectReader(*v, "fit").finish();
  if (const json* v = r.child("graph")) {
    ObjectReader g(*v, "graph");
    c.graph.k = g.integer("k", c.graph.k, 1, kMaxInt);
    const std::string sim = g.text("similarity", "structured");
    if (sim == "structured") {
      c.graph.similarity = SimilarityKind::structured;
    } else if (sim == "cosine") {
      c.graph.similarity = SimilarityKind::cosine;
    } else {
      throw InputError("graph.similarity: expected structured or cosine");
    }
    c.graph.bandwidth = g.bandwidth("bandwidth");
    g.finish();
  }
  if (const json* v = r.child("cluster")) {
    ObjectReader cl(*v, "cluster");
    if (cl.has("k")) c.cluster.k = cl.integer("k", 2, 1, kMaxInt);
    c.cluster.trials = cl.integer("trials", c.cluster.trials, 1, 1000000);
    c.cluster.bandwidth = cl.bandwidth("bandwidth");
    if (const json* runs = cl.child("runs")) {
      if (!runs->is_array() || runs->empty()) throw InputError("cluster.runs: expected a nonempty array");
      c.cluster.runs.clear();
      for (std::size_t i = 0; i < runs->size(); ++i) {
        const std::string path = "cluster.runs[" + std::to_string(i) + "]";
        ObjectReader run(runs->at(i), path);
        try {
          const auto rep = parse_representation(run.text("representation", "similarity-W"));
          const auto alg = parse_algorithm(run.text("algorithm", "kmeans"));
          if (rep == Representation::observation && alg == ClusterAlgorithm::spectral) {
            throw InputError("spectral clustering needs a kernel or similarity representation");
          }
          c.cluster.runs.emplace_back(rep, alg);
        } catch (const InputError& e) {
          throw InputError(path + ": " + e.what());
        }
        run.finish();
      }
    }
    cl.finish();
  }
  if (const json* v = r.child("anomaly")) {
    ObjectReader a(*v, "anomaly");
    c.anomaly.repeats = a.integer("repeats", c.anomaly.repeats, 1, 1000000);
    c.anomaly.alpha = a.number("alpha", c.anomaly.alpha, 0.0, 1.0, true);
    if (c.anomaly.alpha >= 1.0) throw InputError("anomaly.alpha: must lie in (0, 1)");
    const std::string mode = a.text("mode", "full");
    if (mode == "split") {
      c.anomaly.mode = AnomalyMode::split;
    } else if (mode == "full") {
      c.anomaly.mode = AnomalyMode::full;
    } else {
      throw InputError("anomaly.mode: expected split or full");
    }
    c.anomaly.knn_neighbor = a.integer("knn_neighbor", c.anomaly.knn_neighbor, 1, kMaxInt);
    c.anomaly.shuffle_labels = a.flag("shuffle_labels", false);
    c.anomaly.rule = a.flag("literal_rule", false) ? DecisionRule::literal : DecisionRule::lower_tail;
    a.finish();
  }
  if (const json* v = r.child("bench")) {
    ObjectReader b(*v, "bench");
    if (const json* sizes = b.child("sizes")) {
      if (!sizes->is_array() || sizes->empty()) throw InputError("bench.sizes: expected a nonempty array");
      c.bench.sizes.clear();
      for (std::size_t i = 0; i < sizes->size(); ++i) {
        const auto& s = sizes->at(i);
        if (!s.is_number_integer() || s.get<std::int64_t>() < 2 || s.get<std::int64_t>() > 20000) {
          throw InputError("bench.sizes[" + std::to_string(i) + "]: expected an integer in [2, 20000]");
        }
        c.bench.sizes.push_back(s.get<int>());
      }
    }
    c.bench.dimension = b.integer("dimension", c.bench.dimension, 1, 100000);
    c.bench.budget_seconds = b.number("budget_seconds", c.bench.budget_seconds, 0.0, 1e9, true);
    c.bench.budget_size = b.integer("budget_size", c.bench.budget_size, 2, 20000);
    c.bench.oracle_size = b.integer("oracle_size", c.bench.oracle_size, 0, 5000);
    c.bench.oracle_iterations = b.integer("oracle_iterations", c.bench.oracle_iterations, 1, 1000000);
    c.bench.oracle_timed_iterations = b.integer("oracle_timed_iterations", c.bench.oracle_timed_iterations, 1, 1000000);
    b.finish();
  }
  r.finish();

  json effective = j;
  effective["experiment"] = experiment;
  effective["seed"] = c.seed;
  c.hash = config_hash(effective);
  return c;
}

}  // namespace strucsim::cli
