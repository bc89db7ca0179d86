#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "strucsim/cli.hpp"
#include "strucsim/error.hpp"
#include "strucsim/format.hpp"
#include "strucsim/model_io.hpp"
#include "strucsim/prox.hpp"
#include "strucsim/rng.hpp"
#include "strucsim/similarity.hpp"

namespace strucsim::cli {

using nlohmann::json;

namespace {

/// JSON number holding `x` rounded to 9 significant digits.
json real(double x) {
  if (!std::isfinite(x)) return json(nullptr);
  return json(std::stod(format_real(x)));
}

json reals(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real(v(i)));
  return a;
}

json stamp(const RunConfig& c) { return {{"config_hash", c.hash}, {"seed", c.seed}}; }

/// Buffers every output file and writes them together at the end of a run.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::ostringstream& text(const std::string& name) { return files_[name]; }
  void json_file(const std::string& name, const json& j) { files_[name] << j.dump(2) << '\n'; }

  void commit() const {
    std::filesystem::create_directories(dir_);
    for (const auto& [name, content] : files_) {
      std::ofstream out(dir_ / name, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
      out << content.str();
    }
  }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::ostringstream> files_;
};

KernelSpec resolve_kernel(const RunConfig& c, const Eigen::MatrixXd& points) {
  return kernel_from_json(c.kernel, &points, "kernel");
}

std::optional<int> label_id(const Dataset& data, const std::string& name) {
  for (std::size_t i = 0; i < data.label_names.size(); ++i) {
    if (data.label_names[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

struct AnomalyTrial {
  Eigen::MatrixXd train;
  Eigen::MatrixXd test;
  std::vector<int> anomalous;
};

AnomalyTrial make_trial(const DatasetConfig& d, const std::optional<Dataset>& csv, std::uint64_t seed) {
  AnomalyTrial t;
  if (d.source == "csv") {
    int nominal = ionosphere_nominal_label(*csv);
    if (d.nominal_label) {
      const auto id = label_id(*csv, *d.nominal_label);
      if (!id) throw InputError("dataset.nominal_label: no class named '" + *d.nominal_label + "'");
      nominal = *id;
    }
    const SplitPlan plan = split_nominal(*csv, nominal, seed, d.split_counts);
    t.train = csv->subset(plan.train).points;
    t.test = csv->subset(plan.test).points;
    t.anomalous = plan.test_anomalous;
    return t;
  }
  AnomalyData data;
  if (d.source == "clusters") {
    data = gen_clusters(seed, d.counts);
  } else if (d.source == "linear_subspace") {
    data = gen_linear_subspace(seed, d.subspace, d.counts);
  } else {
    throw InputError("dataset.source: anomaly runs need clusters, linear_subspace or a labelled csv");
  }
  t.train = data.train.points;
  t.test = data.test.points;
  t.anomalous.assign(data.test.label_span().begin(), data.test.label_span().end());
  return t;
}

void print_header(std::ostream& out, const RunConfig& c, const std::string& what) {
  out << what << "  config_hash=" << c.hash << " seed=" << c.seed << '\n';
}

}  // namespace

Dataset load_dataset(const RunConfig& c) {
  const DatasetConfig& d = *c.dataset;
  if (d.source == "csv") {
    CsvOptions options;
    options.has_header = d.has_header;
    options.label_column = d.label_column;
    Dataset data = load_csv(d.path, options);
    data.name = d.name;
    return data;
  }
  if (d.source == "line_circle") {
    const LineCircleGeometry geometry;
    const double noise = d.noise_std ? *d.noise_std : geometry.relative_noise * geometry.circle_radius;
    Dataset data = gen_line_circle(d.n_per_class, noise, c.seed, geometry);
    data.name = d.name;
    return data;
  }
  AnomalyData pair =
      d.source == "clusters" ? gen_clusters(c.seed, d.counts) : gen_linear_subspace(c.seed, d.subspace, d.counts);
  pair.train.name = d.name;
  return pair.train;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Dataset data = load_dataset(c);
  const KernelSpec kernel = resolve_kernel(c, data.points);
  const KlrrModelXd model = fit(gram(kernel, data.points), c.lambda);
  const auto& s = model.spectrum;

  json report = stamp(c);
  report["dataset"] = data.name;
  report["dataset_fingerprint"] = data.fingerprint();
  report["n"] = model.size();
  report["kernel"] = kernel_to_json(kernel);
  report["lambda"] = real(model.lambda());
  report["sigma_max"] = real(s.sigma_max());
  report["rank"] = model.rank();
  report["eigenvalues"] = reals(s.eigenvalues);
  report["model_fingerprint"] = model_fingerprint(model);

  print_header(out, c, "fit " + data.name);
  out << "n=" << model.size() << " kernel=" << kernel.describe() << " lambda=" << format_real(model.lambda())
      << " sigma_max=" << format_real(s.sigma_max()) << " rank=" << model.rank() << '\n';
  out << "leading eigenvalues:";
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(10, s.size()); ++i) out << ' ' << format_real(s.eigenvalues(i));
  out << '\n';
  if (model.empty()) {
    err << "warning: lambda >= sigma_max; the model retains no modes (rank 0)\n";
    report["warning"] = "lambda >= sigma_max; rank 0";
  }
  if (data.has_labels()) {
    const double bound = offblock_bound(model);
    const double observed = max_cross_block(model.representation, data.label_span());
    report["offblock_bound"] = real(bound);
    report["max_cross_block"] = real(observed);
    out << "off-block bound=" << format_real(bound) << " max cross-block |z_ij|=" << format_real(observed) << '\n';
  }

  OutputSet files(c.output);
  files.text("model.json") << model_to_json(model, c.hash, c.seed).dump(1) << '\n';
  files.json_file("fit_report.json", report);
  files.commit();
  out << "wrote " << files.path("model.json").string() << '\n';
  return 0;
}

int cmd_graph(const RunConfig& c, std::ostream& out, std::ostream&) {
  const Dataset data = load_dataset(c);
  const Eigen::Index n = data.size();
  if (c.graph.k > n - 1) throw InputError("graph.k: must lie in [1, n-1] (n = " + std::to_string(n) + ")");
  const KernelSpec kernel = resolve_kernel(c, data.points);
  const KlrrModelXd model = fit(gram(kernel, data.points), c.lambda);
  const SimilarityMatrixXd sim =
      c.graph.similarity == SimilarityKind::structured
          ? structured_similarity(model, data.points, c.graph.bandwidth ? *c.graph.bandwidth : median_bandwidth(data.points))
          : cosine_similarity(model);
  const NeighborGraph euclid = knn_graph(euclidean_weights(data.points), c.graph.k, GraphConstruction::euclidean_knn);
  const NeighborGraph structural = knn_graph(sim.values, c.graph.k, GraphConstruction::structural_knn);

  json report = stamp(c);
  report["dataset"] = data.name;
  report["dataset_fingerprint"] = data.fingerprint();
  report["n"] = n;
  report["k"] = c.graph.k;
  report["similarity"] = c.graph.similarity == SimilarityKind::structured ? "structured" : "cosine";
  if (sim.bandwidth) report["bandwidth"] = real(*sim.bandwidth);
  report["rank"] = model.rank();
  report["euclidean_edges"] = euclid.edges.size();
  report["structural_edges"] = structural.edges.size();

  print_header(out, c, "graph " + data.name);
  out << "n=" << n << " k=" << c.graph.k << " euclidean edges=" << euclid.edges.size()
      << " structural edges=" << structural.edges.size() << '\n';
  if (data.has_labels()) {
    const double fe = cross_structure_edge_fraction(euclid, data.label_span());
    const double fs = cross_structure_edge_fraction(structural, data.label_span());
    report["euclidean_cross_fraction"] = real(fe);
    report["structural_cross_fraction"] = real(fs);
    out << "cross-structure edge fraction: euclidean=" << format_real(fe) << " structural=" << format_real(fs) << '\n';
  }

  OutputSet files(c.output);
  write_edge_list(files.text("edges_euclidean.txt"), euclid);
  write_edge_list(files.text("edges_structural.txt"), structural);
  files.json_file("graph_report.json", report);
  files.commit();
  return 0;
}

int cmd_cluster(const RunConfig& c, std::ostream& out, std::ostream&) {
  const Dataset data = load_dataset(c);
  if (!data.has_labels()) throw InputError("dataset: clustering runs need class labels");
  std::set<int> classes(data.label_span().begin(), data.label_span().end());
  const int k = c.cluster.k ? *c.cluster.k : static_cast<int>(classes.size());
  if (k > data.size()) throw InputError("cluster.k: exceeds the number of observations");
  const KernelSpec kernel = resolve_kernel(c, data.points);

  std::vector<TrialSummary> rows;
  for (const auto& [rep, alg] : c.cluster.runs) {
    PipelineSpec spec;
    spec.representation = rep;
    spec.algorithm = alg;
    spec.k = k;
    spec.kernel = kernel;
    spec.lambda = c.lambda;
    spec.structured_bandwidth = c.cluster.bandwidth;
    rows.push_back(run_trials(data, spec, c.cluster.trials, c.seed));
  }

  print_header(out, c, "cluster " + data.name);
  json sidecar = stamp(c);
  sidecar["dataset"] = data.name;
  sidecar["dataset_fingerprint"] = data.fingerprint();
  sidecar["kernel"] = kernel_to_json(kernel);
  sidecar["rows"] = json::array();
  for (const auto& r : rows) {
    out << to_string(r.representation) << '/' << to_string(r.algorithm) << ": error " << format_real(100 * r.mean_error)
        << "% +- " << format_real(100 * r.std_error) << "% over " << r.trials << " trials\n";
    sidecar["rows"].push_back({{"representation", to_string(r.representation)},
                               {"algorithm", to_string(r.algorithm)},
                               {"mean_error", real(r.mean_error)},
                               {"std_error", real(r.std_error)}});
  }

  OutputSet files(c.output);
  write_trial_csv(files.text("cluster_summary.csv"), rows);
  files.json_file("cluster_summary.json", sidecar);
  files.commit();
  return 0;
}

int cmd_anomaly(const RunConfig& c, std::ostream& out, std::ostream&) {
  const DatasetConfig& d = *c.dataset;
  std::optional<Dataset> csv;
  if (d.source == "csv") {
    csv = load_dataset(c);
    if (!csv->has_labels()) throw InputError("dataset.label_column: anomaly runs on csv data need labels");
  }
  const auto& a = c.anomaly;

  std::vector<RocCurve> klrr_curves;
  std::vector<RocCurve> knn_curves;
  std::ostringstream per_repeat;
  per_repeat << "method,repeat,fpr,tpr\n";
  double false_alarms = 0;
  double detections = 0;
  double nominal_total = 0;
  double anomalous_total = 0;
  int n_nominal = 0;
  int n_anomalous = 0;

  for (int rep = 0; rep < a.repeats; ++rep) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(rep);
    AnomalyTrial t = make_trial(d, csv, seed);
    if (a.shuffle_labels) {
      Rng shuffler(seed ^ 0x9e3779b97f4a7c15ULL);
      shuffler.shuffle(std::span<int>(t.anomalous));
    }
    if (a.knn_neighbor > t.train.cols() - 1) {
      throw InputError("anomaly.knn_neighbor: must lie in [1, n_train - 1]");
    }
    const KernelSpec kernel = resolve_kernel(c, t.train);
    const AnomalyModel model = fit_anomaly(t.train, kernel, c.lambda, a.mode, seed);
    const std::vector<AnomalyScore> scores = score_all(model, t.test);
    const KnnBaseline knn = fit_knn_baseline(t.train, a.knn_neighbor);

    std::vector<double> klrr_nominal, klrr_anomalous, knn_nominal, knn_anomalous;
    for (std::size_t i = 0; i < t.anomalous.size(); ++i) {
      const double p_knn = knn_pvalue(knn, t.test.col(static_cast<Eigen::Index>(i)));
      const bool flagged = decide(scores[i].p, a.alpha, a.rule);
      if (t.anomalous[i]) {
        klrr_anomalous.push_back(scores[i].p);
        knn_anomalous.push_back(p_knn);
        detections += flagged;
        anomalous_total += 1;
      } else {
        klrr_nominal.push_back(scores[i].p);
        knn_nominal.push_back(p_knn);
        false_alarms += flagged;
        nominal_total += 1;
      }
    }
    if (klrr_nominal.empty() || klrr_anomalous.empty()) {
      throw InputError("dataset: every repeat needs both nominal and anomalous test points");
    }
    n_nominal = static_cast<int>(klrr_nominal.size());
    n_anomalous = static_cast<int>(klrr_anomalous.size());
    klrr_curves.push_back(roc(klrr_nominal, klrr_anomalous));
    knn_curves.push_back(roc(knn_nominal, knn_anomalous));
    for (const auto& [method, curve] : {std::pair{"klrr", &klrr_curves.back()}, std::pair{"knn", &knn_curves.back()}}) {
      for (const auto& p : curve->points) {
        per_repeat << method << ',' << rep << ',' << format_real(p.fpr) << ',' << format_real(p.tpr) << '\n';
      }
    }
  }

  const auto mean_auc = [](const std::vector<RocCurve>& curves) {
    double s = 0;
    for (const auto& cv : curves) s += cv.auc;
    return s / static_cast<double>(curves.size());
  };
  const double auc_klrr = mean_auc(klrr_curves);
  const double auc_knn = mean_auc(knn_curves);
  const RocCurve mean_klrr = mean_roc(klrr_curves);
  const RocCurve mean_knn = mean_roc(knn_curves);

  OutputSet files(c.output);
  files.text("roc_per_repeat.csv") << per_repeat.str();
  for (const auto& [name, curve] : {std::pair{"klrr", &mean_klrr}, std::pair{"knn", &mean_knn}}) {
    write_roc_csv(files.text(std::string("roc_mean_") + name + ".csv"), *curve);
    json side = stamp(c);
    side["auc"] = real(curve->auc);
    side["n_nominal"] = n_nominal;
    side["n_anomalous"] = n_anomalous;
    side["alpha"] = real(a.alpha);
    side["repeats"] = a.repeats;
    files.json_file(std::string("roc_mean_") + name + ".json", side);
  }
  json metrics = stamp(c);
  metrics["auc_klrr"] = real(auc_klrr);
  metrics["auc_knn"] = real(auc_knn);
  metrics["alpha"] = real(a.alpha);
  metrics["repeats"] = a.repeats;
  metrics["decision_rule"] = a.rule == DecisionRule::literal ? "literal" : "lower_tail";
  metrics["false_alarm_rate"] = real(false_alarms / nominal_total);
  metrics["detection_rate"] = real(detections / anomalous_total);
  metrics["shuffle_labels"] = a.shuffle_labels;
  files.json_file("metrics.json", metrics);
  files.commit();

  print_header(out, c, "anomaly " + d.name);
  out << "repeats=" << a.repeats << " mean AUC: klrr=" << format_real(auc_klrr) << " knn=" << format_real(auc_knn)
      << '\n'
      << "alpha=" << format_real(a.alpha) << " false alarm rate=" << format_real(false_alarms / nominal_total)
      << " detection rate=" << format_real(detections / anomalous_total) << '\n';
  return 0;
}

int cmd_bench(const RunConfig& c, std::ostream& out, std::ostream& err) {
  using Clock = std::chrono::steady_clock;
  const auto seconds = [](Clock::duration d) { return std::chrono::duration<double>(d).count(); };
  const auto& b = c.bench;

  std::vector<int> sizes = b.sizes;
  std::sort(sizes.begin(), sizes.end());
  if (std::find(sizes.begin(), sizes.end(), b.budget_size) == sizes.end()) {
    sizes.insert(std::upper_bound(sizes.begin(), sizes.end(), b.budget_size), b.budget_size);
  }

  // Deterministic results and wall-clock timings go to separate files.
  std::ostringstream results;
  std::ostringstream timing;
  results << "n,rank,model_fingerprint\n";
  timing << "n,gram_seconds,fit_seconds\n";
  double budget_time = 0;
  print_header(out, c, "bench");
  for (int n : sizes) {
    Rng rng(c.seed + static_cast<std::uint64_t>(n));
    Eigen::MatrixXd points(b.dimension, n);
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      for (Eigen::Index i = 0; i < points.rows(); ++i) points(i, j) = rng.normal();
    }
    const KernelSpec kernel = resolve_kernel(c, points);
    const auto t0 = Clock::now();
    const GramMatrixXd g = gram(kernel, points);
    const auto t1 = Clock::now();
    const KlrrModelXd model = fit(g, c.lambda);
    const auto t2 = Clock::now();
    results << n << ',' << model.rank() << ',' << model_fingerprint(model) << '\n';
    timing << n << ',' << format_real(seconds(t1 - t0)) << ',' << format_real(seconds(t2 - t1)) << '\n';
    out << "n=" << n << " rank=" << model.rank() << " gram " << format_real(seconds(t1 - t0)) << " s, fit "
        << format_real(seconds(t2 - t1)) << " s\n";
    if (n == b.budget_size) budget_time = seconds(t2 - t1);
  }

  json report = stamp(c);
  report["sizes"] = sizes;
  report["budget_size"] = b.budget_size;
  report["budget_seconds"] = real(b.budget_seconds);
  json timing_report = stamp(c);
  timing_report["budget_fit_seconds"] = real(budget_time);
  timing_report["within_budget"] = budget_time <= b.budget_seconds;

  if (b.oracle_size > 0) {
    Rng rng(c.seed);
    Eigen::MatrixXd points(b.dimension, b.oracle_size);
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      for (Eigen::Index i = 0; i < points.rows(); ++i) points(i, j) = rng.normal();
    }
    const GramMatrixXd g = gram(resolve_kernel(c, points), points);
    const auto t0 = Clock::now();
    const KlrrModelXd model = fit(g, c.lambda);
    const auto t1 = Clock::now();
    ProxOptions options;
    options.max_iterations = std::min(b.oracle_timed_iterations, b.oracle_iterations);
    proximal_gradient_klrr(g.values, model.lambda(), options);
    const auto t2 = Clock::now();
    const double closed = seconds(t1 - t0);
    const double oracle = seconds(t2 - t1) * b.oracle_iterations / options.max_iterations;
    report["oracle_size"] = b.oracle_size;
    report["oracle_iterations"] = b.oracle_iterations;
    report["oracle_timed_iterations"] = options.max_iterations;
    timing_report["closed_form_seconds"] = real(closed);
    timing_report["oracle_seconds_extrapolated"] = real(oracle);
    timing_report["speedup"] = real(oracle / closed);
    out << "n=" << b.oracle_size << " closed form " << format_real(closed) << " s vs proximal gradient ("
        << b.oracle_iterations << " iterations, extrapolated from " << options.max_iterations << ") "
        << format_real(oracle) << " s: speedup " << format_real(oracle / closed) << "x\n";
  }

  OutputSet files(c.output);
  files.text("bench_results.csv") << results.str();
  files.json_file("bench_report.json", report);
  files.text("bench_timing.csv") << timing.str();
  files.json_file("bench_timing.json", timing_report);
  files.commit();

  if (budget_time > b.budget_seconds) {
    err << "error: closed-form fit at n=" << b.budget_size << " took " << format_real(budget_time)
        << " s, over the " << format_real(b.budget_seconds) << " s budget\n";
    return static_cast<int>(ExitCode::runtime);
  }
  return 0;
}

}  // namespace strucsim::cli
