#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "driftguard/drift_geometry.hpp"
#include "driftguard/linalg.hpp"
#include "driftguard/mlp.hpp"
#include "driftguard/objectives.hpp"

namespace driftguard {

/// Risk r(t) sampled at strictly increasing times; the deployment horizon is
/// [times.front(), times.back()] and between samples r is taken as the
/// piecewise-linear interpolant.
struct RiskTrajectory {
  Vector times;
  Vector values;

  double horizon() const { return times.back() - times.front(); }
  /// Throws ValidationError unless >= 2 points, strictly increasing times, finite values.
  void validate() const;
};

/// Var_U r(U) for U uniform on the horizon: exact variance of the
/// piecewise-linear interpolant (trapezoid weights for the mean), so uneven
/// spacing is weighted by elapsed time, not by sample count.
double volatility(const RiskTrajectory& traj);

/// ∫ (r')² dt with r' the slope between consecutive samples.
double derivative_energy(const RiskTrajectory& traj);

struct PoincareCheck {
  double volatility;
  double rhs;  // T/π² · ∫(r')²
  bool holds;
};

/// Volatility against (T/π²)∫(r')², holds when vol <= rhs·(1 + 1e-9).
PoincareCheck check_poincare(const RiskTrajectory& traj);

/// Samples and velocities of a deployment path at each evaluation time.
struct DeploymentPath {
  Vector times;
  std::vector<Matrix> samples;     // per time, n_t × d
  std::vector<Matrix> velocities;  // per time, same shape as samples

  void validate(std::size_t input_dim) const;
};

/// ∫ E (∇f(X_t)·Ẋ_t)² dt, Monte-Carlo mean per time then trapezoid in time.
double jv_energy(const MlpModel& model, const DeploymentPath& path);

struct LowRankTerms {
  double b_v = 0.0;    // ∫ E ‖J_f V‖_F² ‖a_t‖²
  double b_rho = 0.0;  // ∫ E (J_f ρ_t)²
};

/// Split each velocity as V·a + ρ with a = Vᵀẋ and accumulate the two terms.
LowRankTerms lowrank_terms(const MlpModel& model, const DeploymentPath& path, const DriftSubspace& v);

struct BetaEstimate {
  double value = 1.0;
  bool empirical = false;
};

/// β with |∇g·ẋ| <= β|∇f·ẋ| for g = h∘f. bce_logit: 1 (|h'| <= 1).
/// mse: sup 2|f(x) − y| over the supplied scores/targets, flagged empirical.
BetaEstimate beta_for_loss(LossKind kind, std::span<const double> scores = {}, std::span<const double> targets = {});

struct BoundReport {
  double volatility = 0.0;
  double derivative_energy = 0.0;
  double jv_energy = 0.0;
  double beta = 1.0;
  bool beta_empirical = false;
  double b_v = 0.0;
  double b_rho = 0.0;
  double horizon = 0.0;
  double poincare_rhs = 0.0;  // T/π² · derivative_energy
  double jv_rhs = 0.0;        // β²T/π² · jv_energy
  double lowrank_rhs = 0.0;   // 2β²T/π² · (B_V + B_ρ)
  bool holds_poincare = false;
  bool holds_jv = false;
  bool holds_lowrank = false;
};

BoundReport make_bound_report(const RiskTrajectory& traj, double jv_energy_value, const LowRankTerms& lowrank,
                              const BetaEstimate& beta);

/// Full evaluation: trajectory, Jacobian-velocity energy and low-rank terms.
BoundReport evaluate_bounds(const MlpModel& model, const RiskTrajectory& traj, const DeploymentPath& path,
                            const DriftSubspace& v, const BetaEstimate& beta);

std::string bound_report_json(const BoundReport& r);
BoundReport bound_report_from_json(const std::string& text);

}  // namespace driftguard
