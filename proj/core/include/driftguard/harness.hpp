#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftguard/config.hpp"
#include "driftguard/datasets.hpp"
#include "driftguard/deployment_eval.hpp"
#include "driftguard/drift_geometry.hpp"
#include "driftguard/mlp.hpp"
#include "driftguard/monitoring.hpp"
#include "driftguard/stats.hpp"

namespace driftguard {

struct CellKey {
  std::string method;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  /// "method_lambda_seed", used for file names.
  std::string str() const;
  friend bool operator<(const CellKey& a, const CellKey& b);
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

/// Everything measured for one trained model. Deployment metrics are in the
/// target's original units; gains are in the units of the trained score.
struct CellResult {
  CellKey key;
  double val_loss = 0.0;
  double val_gain = 0.0;
  double deploy_risk = 0.0;       // mean risk over the deployment horizon
  double volatility = 0.0;
  double derivative_energy = 0.0;
  double directional_gain = 0.0;  // drift-direction Jacobian energy
  double terminal_risk = 0.0;     // final-block (final-time) loss
  BoundReport bounds;
  RiskTrajectory trajectory;
  std::optional<HazardTrace> hazard;
  MlpModel model;

  /// Throws NumericalError naming the cell if any metric is non-finite.
  void validate() const;
};

enum class Metric { deploy_risk, volatility, derivative_energy, directional_gain, terminal_risk };
inline constexpr Metric kAllMetrics[] = {Metric::deploy_risk, Metric::volatility, Metric::derivative_energy,
                                         Metric::directional_gain, Metric::terminal_risk};
std::string to_string(Metric m);
double metric_value(const CellResult& c, Metric m);

/// Data and drift subspaces shared by all cells of one experiment. Immutable
/// after construction and safe to use from several threads.
class ExperimentContext {
 public:
  /// Loads real data when the experiment needs it.
  explicit ExperimentContext(ExperimentConfig config);
  /// Real-data context from an already loaded series.
  ExperimentContext(ExperimentConfig config, BlockedSeries series);

  const ExperimentConfig& config() const { return config_; }
  const std::optional<BlockedSeries>& series() const { return series_; }
  std::size_t input_dim() const;
  std::vector<std::size_t> layer_dims() const;

  /// Training subspace for a method (nullopt for unpenalized methods).
  std::optional<DriftSubspace> subspace_for(const MethodSpec& m) const;
  /// Subspace used for gains and tie-breaks regardless of method.
  const DriftSubspace& evaluation_subspace() const { return eval_subspace_; }
  /// Named subspaces to export (method name → basis).
  std::map<std::string, DriftSubspace> subspaces() const;

  MlpModel initial_model(std::uint64_t seed) const;
  TrainingData training_data(std::uint64_t seed) const;
  /// Train one cell and evaluate it.
  CellResult run_cell(const MethodSpec& m, double lambda, std::uint64_t seed) const;
  /// Evaluate an already trained model as the given cell.
  CellResult evaluate(const MethodSpec& m, double lambda, std::uint64_t seed, MlpModel model) const;

  /// Deployment blocks (real data) or per-time particle batches (synthetic).
  std::vector<Matrix> deployment_blocks(std::uint64_t seed) const;

 private:
  void prepare_real();

  ExperimentConfig config_;
  std::optional<BlockedSeries> series_;
  DriftSubspace eval_subspace_;
  std::map<std::string, DriftSubspace> real_subspaces_;
  // Real-data design, with the target standardized on the training window.
  double target_mean_ = 0.0;
  double target_sd_ = 1.0;
  TrainingData train_, val_;
  std::vector<Matrix> deploy_x_;
  std::vector<Vector> deploy_y_;
  Vector deploy_times_;
  std::vector<Vector> deploy_velocity_;
};

/// Mean validation loss/gain of one λ across seeds.
struct LambdaScore {
  double lambda;
  double val_loss;
  double val_gain;
};

/// Minimum mean validation loss; ties within relative 1e-6 go to the smaller
/// validation gain, then to the smaller λ. Independent of input order.
double select_lambda(const std::vector<LambdaScore>& scores);
double select_lambda(const std::vector<CellResult>& cells, const std::string& method);

/// Cells of `method` (optionally at one λ), ordered by seed.
std::vector<const CellResult*> cells_for(const std::vector<CellResult>& cells, const std::string& method,
                                         std::optional<double> lambda = std::nullopt);

struct MetricSummary {
  std::size_t n = 0;
  std::map<Metric, double> mean;
  std::map<Metric, double> sd;
};
/// Cross-seed means. With `nonzero_sweep` all cells of the method with λ > 0
/// are pooled, matching a "mean over the sweep" report.
MetricSummary summarize(const std::vector<CellResult>& cells, const std::string& method,
                        std::optional<double> lambda, bool nonzero_sweep = false);

/// Spearman correlations of the monitoring scores against next-block squared
/// risk change, pooled across seeds with per-seed rank normalization.
struct MonitoringSummary {
  double drift = 0.0;    // s_t²
  double gain = 0.0;     // G_t
  double product = 0.0;  // h_t
  double roll2 = 0.0;
  double roll3 = 0.0;
  std::size_t pairs_product = 0;
  std::size_t pairs_roll3 = 0;
};
MonitoringSummary monitoring_summary(const std::vector<const CellResult*>& cells);

struct PairedRow {
  std::string label;  // "a vs b"
  Metric metric;
  PairedComparison result;
};

struct RunSummary {
  ExperimentConfig config;
  std::vector<CellResult> cells;  // sorted by key
  std::map<std::string, double> selected_lambda;
  std::vector<PairedRow> paired;
  std::optional<MonitoringSummary> monitoring;
  std::map<std::string, DriftSubspace> subspaces;
  std::string dataset_sha256;
  std::optional<BlockedSeries> series;  // cleaned real data, cached into the run directory
};

/// Runs every (seed × method × λ) cell with matched seeds on a work queue of
/// config.threads workers, then aggregates in key order.
RunSummary run_experiment(const ExperimentConfig& config);
RunSummary run_experiment(const ExperimentContext& ctx);

/// Writes the run directory (CSV tables, bound reports, hazard traces,
/// checkpoints, plot data). Returns the directory.
std::string write_run(const RunSummary& run, const std::string& dir);

struct VerifyResult {
  std::size_t checked = 0;
  std::size_t poincare_failures = 0;
  std::size_t jv_failures = 0;
  std::size_t lowrank_failures = 0;
  double max_relative_mismatch = 0.0;  // recomputed vs saved bound reports
  std::vector<std::string> messages;
};

/// Reloads each saved model, recomputes its bound report and compares it to
/// the saved one.
VerifyResult verify_run(const std::string& dir);

/// Loads the context recorded in a run directory.
ExperimentContext load_run_context(const std::string& dir);

}  // namespace driftguard
