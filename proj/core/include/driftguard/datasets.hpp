#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "driftguard/linalg.hpp"
#include "driftguard/rng.hpp"

namespace driftguard {

// ---------------------------------------------------------------------------
// Synthetic drifting stream
// ---------------------------------------------------------------------------

/// Drift speed δ̇(t) = 0.55 + 1.05·exp(−((t−0.33)/0.10)²) + 0.75·exp(−((t−0.76)/0.08)²).
double drift_speed(double t);
/// δ(t) = ∫₀ᵗ δ̇, closed form via erf; δ(0) = 0.
double drift_offset(double t);

struct SyntheticConfig {
  std::size_t n_train = 2048;
  std::size_t n_val = 1024;
  std::size_t n_eval = 512;      // particles followed along the deployment path
  std::size_t grid_points = 201;  // evaluation times on [0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

/// Time-independent draws behind a synthetic sample: label and standard
/// normal noises. Positions at time t are a deterministic function of these,
/// so one base set traced over t is a sample path X_t with Ẋ_t = δ̇(t)·e₂.
struct SyntheticBase {
  Vector labels;  // Y ∈ {0, 1}
  Vector z1, z2;

  std::size_t size() const { return labels.size(); }
  /// x₁ = 1.05·S + 0.90·z₁,  x₂ = 1.25·S + δ(t) + 0.55·z₂,  S = 2Y − 1.
  Matrix features_at(double t) const;
  /// Ẋ_t for every row: (0, δ̇(t)).
  Matrix velocities_at(double t) const;
};

SyntheticBase sample_synthetic_base(std::size_t n, Rng& rng);

struct LabeledSample {
  Matrix x;
  Vector y;
};

/// Fresh samples at time t: deterministic per (t, n, seed).
LabeledSample sample_synthetic(double t, std::size_t n, std::uint64_t seed);

/// Uniform grid of `points` times covering [0, 1].
Vector synthetic_time_grid(std::size_t points);

// ---------------------------------------------------------------------------
// Blocked real-data series
// ---------------------------------------------------------------------------

enum class BlockRole { train, val, deploy };
std::string to_string(BlockRole r);

struct FeatureScaling {
  double mean = 0.0;
  double std = 1.0;
};

/// Standardized covariates and targets split into ordered blocks.
struct BlockedSeries {
  std::string name;
  std::vector<std::string> feature_names;
  std::string target_name;
  Matrix features;            // n×d, standardized with training-window statistics
  Vector targets;             // n
  std::vector<int> block_ids; // nondecreasing
  std::vector<BlockRole> roles;                            // per block
  std::vector<std::pair<double, double>> block_time_spans; // per block, days since series start
  std::vector<FeatureScaling> standardization;             // per feature
  bool target_standardized = false;
  FeatureScaling target_scaling;
  std::string source_sha256;

  std::size_t num_blocks() const { return roles.size(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t count(BlockRole role) const;
  std::vector<std::size_t> rows_with_role(BlockRole role) const;
  std::vector<std::size_t> rows_in_block(int block) const;
  std::vector<int> blocks_with_role(BlockRole role) const;

  Matrix features_for(BlockRole role) const;
  Vector targets_for(BlockRole role) const;
  Matrix block_features(int block) const;
  Vector block_targets(int block) const;
  double block_midpoint(int block) const;

  /// Throws DataError on any broken invariant.
  void validate() const;
};

struct LoadOptions {
  /// Require the published post-cleaning split sizes exactly.
  bool enforce_reference_counts = true;
};

inline constexpr double kAirQualityMissing = -200.0;

struct SplitCounts {
  std::size_t train, val, deploy, deploy_blocks;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

inline constexpr SplitCounts kAirQualityCounts{1573, 580, 5191, 20};
inline constexpr SplitCounts kTetouanCounts{17280, 8784, 26352, 6};

/// Column names in the UCI files.
inline const std::array<std::string, 8> kAirQualityFeatures{"PT08.S1(CO)", "PT08.S2(NMHC)", "PT08.S3(NOx)",
                                                            "PT08.S4(NO2)", "PT08.S5(O3)",   "T",
                                                            "RH",           "AH"};
inline const std::string kAirQualityTarget = "CO(GT)";
/// Indices of the five sensor channels within kAirQualityFeatures.
inline const std::array<std::size_t, 5> kAirQualitySensorColumns{0, 1, 2, 3, 4};

inline const std::array<std::string, 5> kTetouanFeatures{"Temperature", "Humidity", "Wind Speed",
                                                         "general diffuse flows", "diffuse flows"};
inline const std::string kTetouanTarget = "Zone 1 Power Consumption";

/// UCI Air Quality (semicolon-separated, decimal comma). Rows where the
/// target or any feature equals −200 are dropped; 12-week train, 4-week val,
/// then 14-day deployment blocks, all measured on the raw timeline from the
/// first timestamp. Features and target standardized on the training window.
BlockedSeries load_air_quality(const std::string& path, const LoadOptions& opts = {});

/// UCI Tetouan power consumption (comma-separated, ten-minute cadence).
/// Jan–Apr train, May–Jun val, Jul–Dec deploy in calendar-month blocks.
/// Features standardized on the training window; target kept in raw units.
BlockedSeries load_tetouan(const std::string& path, const LoadOptions& opts = {});

SplitCounts split_counts(const BlockedSeries& s);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_hex(std::string_view bytes);

/// Canonical cleaned-data cache: one header line, then one column per line
/// ("name v0 v1 ..."), numbers as hex floats.
void write_dataset_cache(const BlockedSeries& s, const std::string& path);
BlockedSeries read_dataset_cache(const std::string& path);

}  // namespace driftguard
