#include "strucsim/model_io.hpp"

#include <cmath>
#include <fstream>

#include "strucsim/error.hpp"
#include "strucsim/hash.hpp"

namespace strucsim {

using nlohmann::json;

namespace {

double number_field(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw InputError(path + "." + key + ": missing");
  if (!j.at(key).is_number()) throw InputError(path + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InputError(path + "." + key + ": unknown field");
  }
}

std::vector<double> number_array(const json& j, const char* key, std::size_t expected) {
  if (!j.contains(key) || !j.at(key).is_array()) throw InputError(std::string("model.") + key + ": expected an array");
  const auto& a = j.at(key);
  if (a.size() != expected) {
    throw InputError(std::string("model.") + key + ": expected " + std::to_string(expected) + " entries, found " +
                     std::to_string(a.size()));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : a) {
    if (!v.is_number()) throw InputError(std::string("model.") + key + ": non-numeric entry");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw InputError(std::string("model.") + key + ": non-finite entry");
    out.push_back(x);
  }
  return out;
}

}  // namespace

json kernel_to_json(const KernelSpec& spec) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearKernel>) {
          return {{"type", "linear"}};
        } else if constexpr (std::is_same_v<K, RbfKernel>) {
          return {{"type", "rbf"}, {"bandwidth", k.bandwidth}};
        } else if constexpr (std::is_same_v<K, PolynomialKernel>) {
          return {{"type", "poly"}, {"degree", k.degree}, {"offset", k.offset}};
        } else {
          return {{"type", "product"}, {"left", kernel_to_json(*k.left)}, {"right", kernel_to_json(*k.right)}};
        }
      },
      spec.variant());
}

bool kernel_needs_data(const json& j) {
  if (!j.is_object()) return false;
  if (j.contains("bandwidth") && j.at("bandwidth").is_string()) return true;
  return (j.contains("left") && kernel_needs_data(j.at("left"))) ||
         (j.contains("right") && kernel_needs_data(j.at("right")));
}

KernelSpec kernel_from_json(const json& j, const Eigen::MatrixXd* points, const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  if (!j.contains("type") || !j.at("type").is_string()) throw InputError(path + ".type: missing or not a string");
  const auto type = j.at("type").get<std::string>();
  try {
    if (type == "linear") {
      reject_unknown(j, {"type"}, path);
      return KernelSpec::linear();
    }
    if (type == "rbf") {
      reject_unknown(j, {"type", "bandwidth"}, path);
      if (!j.contains("bandwidth")) throw InputError(path + ".bandwidth: missing");
      const auto& bw = j.at("bandwidth");
      if (bw.is_string()) {
        if (bw.get<std::string>() != "median") throw InputError(path + ".bandwidth: expected a number or \"median\"");
        if (points == nullptr) throw InputError(path + ".bandwidth: \"median\" needs a dataset");
        return KernelSpec::rbf(median_bandwidth(*points));
      }
      return KernelSpec::rbf(number_field(j, "bandwidth", path));
    }
    if (type == "poly") {
      reject_unknown(j, {"type", "degree", "offset"}, path);
      int degree = 3;
      if (j.contains("degree")) {
        if (!j.at("degree").is_number_integer()) throw InputError(path + ".degree: expected an integer");
        degree = j.at("degree").get<int>();
      }
      const double offset = j.contains("offset") ? number_field(j, "offset", path) : 1.0;
      return KernelSpec::polynomial(degree, offset);
    }
    if (type == "product") {
      reject_unknown(j, {"type", "left", "right"}, path);
      if (!j.contains("left") || !j.contains("right")) throw InputError(path + ": product needs left and right");
      return KernelSpec::product(kernel_from_json(j.at("left"), points, path + ".left"),
                                 kernel_from_json(j.at("right"), points, path + ".right"));
    }
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw InputError(path + ": " + msg);
  }
  throw InputError(path + ".type: unknown kernel type '" + type + "' (expected linear, rbf, poly or product)");
}

std::string model_fingerprint(const KlrrModelXd& model) {
  Fnv1a h;
  const auto& s = model.spectrum;
  h.add(static_cast<std::uint64_t>(s.size()));
  h.add(s.lambda);
  for (Eigen::Index i = 0; i < s.size(); ++i) h.add(s.eigenvalues(i));
  for (Eigen::Index i = 0; i < s.size(); ++i) h.add(s.thresholded(i));
  for (Eigen::Index j = 0; j < s.eigenvectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.eigenvectors.rows(); ++i) h.add(s.eigenvectors(i, j));
  }
  h.add(model.kernel() ? kernel_to_json(*model.kernel()).dump() : std::string("external"));
  h.add(model.fingerprint());
  return h.hex();
}

json model_to_json(const KlrrModelXd& model, const std::string& config_hash, std::uint64_t seed) {
  const auto& s = model.spectrum;
  const Eigen::Index n = s.size();
  std::vector<double> vectors;
  vectors.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) vectors.push_back(s.eigenvectors(i, j));
  }
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["kernel"] = model.kernel() ? kernel_to_json(*model.kernel()) : json(nullptr);
  j["lambda"] = static_cast<double>(s.lambda);
  j["n"] = n;
  j["rank"] = model.rank();
  j["eigenvalues"] = std::vector<double>(s.eigenvalues.data(), s.eigenvalues.data() + n);
  j["thresholded"] = std::vector<double>(s.thresholded.data(), s.thresholded.data() + n);
  j["eigenvector_layout"] = "row-major; entry [i*n+j] is coordinate i of eigenvector j; eigenvalues nonincreasing";
  j["eigenvectors"] = std::move(vectors);
  j["dataset_fingerprint"] = model.fingerprint();
  j["model_fingerprint"] = model_fingerprint(model);
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  return j;
}

ModelFile model_from_json(const json& j) {
  if (!j.is_object()) throw InputError("model: expected a JSON object");
  if (j.value("format", std::string()) != kModelFormat) throw InputError("model.format: not a strucsim model file");
  if (!j.contains("version") || j.at("version") != kModelVersion) {
    throw InputError("model.version: unsupported version (expected " + std::to_string(kModelVersion) + ")");
  }
  if (!j.contains("n") || !j.at("n").is_number_integer() || j.at("n").get<std::int64_t>() < 1) {
    throw InputError("model.n: expected a positive integer");
  }
  const auto n = j.at("n").get<Eigen::Index>();
  const auto un = static_cast<std::size_t>(n);
  const auto values = number_array(j, "eigenvalues", un);
  const auto shrink = number_array(j, "thresholded", un);
  const auto vectors = number_array(j, "eigenvectors", un * un);
  const double lambda = number_field(j, "lambda", "model");
  if (lambda < 0.0) throw InputError("model.lambda: must be nonnegative");

  Spectrum<double> s;
  s.lambda = lambda;
  s.eigenvalues = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  s.thresholded = Eigen::Map<const Eigen::VectorXd>(shrink.data(), n);
  s.eigenvectors = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vectors.data(), n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.eigenvalues(i) < 0.0) throw InputError("model.eigenvalues: negative entry");
    if (i > 0 && s.eigenvalues(i) > s.eigenvalues(i - 1)) throw InputError("model.eigenvalues: not nonincreasing");
    const double expected = s.eigenvalues(i) > lambda ? 1.0 - lambda / s.eigenvalues(i) : 0.0;
    if (std::abs(expected - s.thresholded(i)) > 1e-12) {
      throw InputError("model.thresholded: inconsistent with eigenvalues and lambda at index " + std::to_string(i));
    }
  }
  const double drift =
      (s.eigenvectors.transpose() * s.eigenvectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (drift > kOrthonormalityTolerance) throw InputError("model.eigenvectors: columns are not orthonormal");

  GramMatrixXd g;
  g.values = s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
  g.values = (0.5 * (g.values + g.values.transpose())).eval();
  if (j.contains("kernel") && !j.at("kernel").is_null()) g.kernel = kernel_from_json(j.at("kernel"), nullptr, "model.kernel");
  if (!j.contains("dataset_fingerprint") || !j.at("dataset_fingerprint").is_string()) {
    throw InputError("model.dataset_fingerprint: missing");
  }
  g.fingerprint = j.at("dataset_fingerprint").get<std::string>();

  ModelFile out;
  out.model = model_from_spectrum(std::move(s), std::move(g));
  out.config_hash = j.value("config_hash", std::string());
  out.seed = j.value("seed", std::uint64_t{0});
  return out;
}

void save_model(const std::filesystem::path& path, const KlrrModelXd& model, const std::string& config_hash,
                std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << model_to_json(model, config_hash, seed).dump(1) << '\n';
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace strucsim
