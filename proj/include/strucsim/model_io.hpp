#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "strucsim/kernel.hpp"
#include "strucsim/klrr.hpp"

namespace strucsim {

inline constexpr const char* kModelFormat = "strucsim-klrr-model";
inline constexpr int kModelVersion = 1;
inline constexpr double kOrthonormalityTolerance = 1e-8;

/// `{type: linear}`, `{type: rbf, bandwidth}`, `{type: poly, degree, offset}`,
/// `{type: product, left, right}`.
nlohmann::json kernel_to_json(const KernelSpec& spec);

/// Parses a kernel object. A bandwidth of "median" is replaced by the median
/// pairwise distance of `points`, which must then be supplied. Errors name
/// the offending field starting from `path`.
KernelSpec kernel_from_json(const nlohmann::json& j, const Eigen::MatrixXd* points = nullptr,
                            const std::string& path = "kernel");

/// True when any rbf node asks for the median bandwidth.
bool kernel_needs_data(const nlohmann::json& j);

/// Hash over the spectrum, lambda, kernel and dataset fingerprint.
std::string model_fingerprint(const KlrrModelXd& model);

struct ModelFile {
  KlrrModelXd model;
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Eigenvectors are stored row-major (entry [i * n + j] is coordinate i of
/// eigenvector j). Doubles keep full round-trip precision.
nlohmann::json model_to_json(const KlrrModelXd& model, const std::string& config_hash, std::uint64_t seed);

/// Checks format, sizes, finiteness, ordering, nonnegativity, orthonormality
/// and shrinkage consistency, then rebuilds the Gram matrix as U diag(s) U^T.
ModelFile model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const KlrrModelXd& model, const std::string& config_hash,
                std::uint64_t seed);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace strucsim
