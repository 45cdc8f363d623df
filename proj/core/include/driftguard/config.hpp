#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "driftguard/datasets.hpp"
#include "driftguard/objectives.hpp"

namespace driftguard {

enum class ExperimentKind { synthetic_sanity, directional_vs_isotropic, misspecification, air_quality, tetouan };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);
bool is_synthetic(ExperimentKind k);

/// One configured training method. `subspace` names how the DTR basis is
/// built: "none", "true_axis", "rotated", "identity", "target_orthogonal",
/// "diff_pca" or "diff_pca_all".
struct MethodSpec {
  std::string name;
  PenaltyKind penalty = PenaltyKind::none;
  std::string subspace = "none";
  double angle_deg = 0.0;  // rotated only
  std::vector<double> lambdas;
};

/// Run configuration, read from a JSON document. Every key is optional and
/// falls back to the experiment's defaults:
///
///   experiment      "synthetic_sanity" | "directional_vs_isotropic" |
///                   "misspecification" | "air_quality" | "tetouan"  (required)
///   seeds           [0, 1, ...]           or  "num_seeds": N
///   lambda_grid     {"dtr": [...], "isotropic": [...], "dtr_all": [...]}
///   angles_deg      [0, 20, 90]           misspecification only
///   hidden          [32, 32]
///   train           {"epochs", "batch_size", "learning_rate",
///                    "adam_beta1", "adam_beta2", "adam_eps"}
///   synthetic       {"n_train", "n_val", "n_eval", "grid_points"}
///   data            {"air_quality": path, "tetouan": path,
///                    "enforce_reference_counts": bool}
///   bootstrap       {"resamples", "seed"}
///   output_dir      run directory
///   threads         worker count (>= 1)
///   save_models     bool
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::synthetic_sanity;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::vector<double>> lambda_grid;
  std::vector<double> angles_deg;
  std::vector<std::size_t> hidden;
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  SyntheticConfig synthetic;
  std::string air_quality_path;
  std::string tetouan_path;
  bool enforce_reference_counts = true;
  std::size_t bootstrap_resamples = 10000;
  std::uint64_t bootstrap_seed = 0;
  std::string output_dir = "runs/out";
  std::size_t threads = 1;
  bool save_models = true;

  static ExperimentConfig defaults(ExperimentKind kind);

  /// Methods in run order, with their λ grids resolved.
  std::vector<MethodSpec> methods() const;
  TrainConfig train_config(const MethodSpec& m, double lambda, std::uint64_t seed) const;
  LossKind loss_kind() const;

  /// Throws ConfigError.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved config as JSON (sorted keys), parseable by parse_config.
std::string config_json(const ExperimentConfig& c);

}  // namespace driftguard
