#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftguard/linalg.hpp"

namespace driftguard {

enum class Provenance { true_axis, mean_diff, diff_pca, target_orthogonal_sensor, rotated, identity };

std::string to_string(Provenance p);

/// Orthonormal d×k set of drift directions.
struct DriftSubspace {
  Matrix basis;  // d×k, orthonormal columns
  Provenance provenance = Provenance::true_axis;
  double rotation_angle = 0.0;  // radians, for Provenance::rotated
  std::optional<std::vector<std::size_t>> window_blocks;
  bool ridge_fallback = false;  // target-orthogonal OLS needed the ridge

  std::size_t dim() const { return basis.rows(); }
  std::size_t rank() const { return basis.cols(); }
  Vector direction(std::size_t j) const { return basis.col(j); }

  /// Throws ValidationError unless 1 <= k <= d and ‖BᵀB − I‖_max <= tol.
  void validate(double tol = 1e-10) const;

  static DriftSubspace from_direction(std::span<const double> v, Provenance p);
  static DriftSubspace axis(std::size_t d, std::size_t axis_index);
  static DriftSubspace full_identity(std::size_t d);
};

inline constexpr double kNoDriftTolerance = 1e-12;

/// (μ_t − μ_prev)/‖μ_t − μ_prev‖. Throws NoDriftError when the norm is <= 1e-12.
Vector mean_diff_direction(std::span<const double> mu_t, std::span<const double> mu_prev);

struct EigenPair {
  double value;
  Vector vector;
};

/// Options for the deflated power iteration on a small symmetric PSD matrix.
struct PowerIterationOptions {
  double relative_tolerance = 1e-12;
  double vector_tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  /// Eigenvalues at or below rank_tolerance * scale count as zero.
  double rank_tolerance = 1e-12;
};

/// Top-k eigenpairs of symmetric PSD `gram` by power iteration with deflation.
/// `scale` sets the magnitude below which eigenvalues are treated as zero
/// (defaults to the trace). Throws RankError when fewer than k are nonzero.
std::vector<EigenPair> top_eigenpairs(const Matrix& gram, std::size_t k,
                                      std::optional<double> scale = std::nullopt,
                                      const PowerIterationOptions& opts = {});

/// Flip v so its largest-magnitude entry is positive (first index wins ties).
void apply_sign_convention(std::span<double> v);

/// Top-k right singular vectors of the uncentered difference cloud (n×d).
DriftSubspace diff_cloud_pca(const Matrix& diffs, std::size_t k);

/// Consecutive block mean-shift vectors μ_t − μ_{t−1} as rows.
Matrix consecutive_shifts(const std::vector<Vector>& block_means);

struct TargetOrthogonalResult {
  DriftSubspace subspace;
  Vector target_direction;  // u embedded in full space (zeros off-sensor)
};

/// Sensor-restricted drift subspace with the supervised OLS target direction
/// projected out, embedded back into the full feature space.
TargetOrthogonalResult target_orthogonal_sensor_subspace(const Matrix& train_x,
                                                         std::span<const double> train_y,
                                                         const std::vector<Vector>& deploy_block_means,
                                                         std::span<const std::size_t> sensor_cols,
                                                         std::size_t k = 2);

/// (sin α, cos α): alignment with e_2 is cos α.
Vector rotated_direction(double alpha_radians);

/// Write basis as CSV, one column per direction.
void write_subspace_csv(const DriftSubspace& v, const std::string& path);

}  // namespace driftguard
