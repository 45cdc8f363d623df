#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "driftguard/linalg.hpp"
#include "driftguard/mlp.hpp"

namespace driftguard {

/// Per-transition hazard quantities. Entry i describes block
/// block_index[i] (>= delta) against block block_index[i] − delta. Invalid
/// entries (no measurable mean shift) hold NaN in s, g, h and are skipped by
/// the rolling means; roll2_h/roll3_h are NaN until 2/3 valid entries exist.
struct HazardTrace {
  std::vector<std::size_t> block_index;
  Vector s;               // ‖μ_t − μ_{t−Δ}‖/Δ
  std::vector<Vector> v;  // unit drift direction (empty when invalid)
  Vector g;               // E (∇f·v_t)²
  Vector h;               // s²·g
  Vector roll2_h;
  Vector roll3_h;
  std::vector<bool> valid;

  std::size_t size() const { return block_index.size(); }
};

/// Hazard trace over consecutive blocks of standardized covariates.
HazardTrace hazard_trace(const MlpModel& model, const std::vector<Matrix>& blocks, std::size_t delta = 1);

/// Trailing mean over the last `window` valid entries (NaN until available).
Vector trailing_valid_mean(const Vector& values, const std::vector<bool>& valid, std::size_t window);

void write_hazard_csv(const HazardTrace& trace, const std::string& path);
std::string hazard_csv(const HazardTrace& trace);

/// Split a drift velocity as v·ā + ρ with ρ ⊥ v.
struct DriftSplit {
  double abar;
  Vector rho;
};
DriftSplit split_drift(std::span<const double> velocity, std::span<const double> v_ref);

/// Rank-1 bookkeeping terms for G_t against a reference direction.
struct HazardDecomposition {
  double abar = 0.0;
  double rho_norm = 0.0;
  double theta = 0.0;  // angle between v_t and v_ref, in [0, π]
  Vector u;            // unit completion, u ⊥ v_ref
  double g_par = 0.0;
  double g_perp = 0.0;
  double c_overlap = 0.0;
  double g_direct = 0.0;         // E (∇f·v_t)² evaluated directly
  double g_reconstructed = 0.0;  // cos²θ G∥ + sin²θ G⊥ + 2 sinθ cosθ C
  double s2 = 0.0;               // ā² + ‖ρ‖²
};

/// Throws ValidationError if v_t or v_ref is not unit or ρ is not ⊥ v_ref,
/// and NumericalError if the reconstruction of G_t misses the direct value by
/// more than 1e-10 (relative to max(1, G_t)).
HazardDecomposition decompose_hazard(const MlpModel& model, const Matrix& block_samples, std::span<const double> v_t,
                                     std::span<const double> v_ref, double abar, std::span<const double> rho);

}  // namespace driftguard
