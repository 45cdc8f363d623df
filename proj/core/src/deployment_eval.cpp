#include "driftguard/deployment_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "driftguard/error.hpp"

namespace driftguard {

namespace {

constexpr double kPoincareSlack = 1e-9;

double trapezoid(const Vector& times, const Vector& values) {
  double total = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) total += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
  return total;
}

}  // namespace

void RiskTrajectory::validate() const {
  if (times.size() != values.size()) throw ShapeError("risk trajectory times/values length mismatch");
  if (times.size() < 2) throw ValidationError("risk trajectory needs at least two points");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(times[i])) throw ValidationError("risk trajectory has non-finite entries");
    if (i > 0 && !(times[i] > times[i - 1])) throw ValidationError("risk trajectory times must be strictly increasing");
  }
}

double volatility(const RiskTrajectory& traj) {
  traj.validate();
  const double horizon = traj.horizon();
  const double mean = trapezoid(traj.times, traj.values) / horizon;
  double second = 0.0;
  for (std::size_t i = 1; i < traj.times.size(); ++i) {
    const double a = traj.values[i - 1] - mean;
    const double b = traj.values[i] - mean;
    second += (traj.times[i] - traj.times[i - 1]) * (a * a + a * b + b * b) / 3.0;
  }
  return std::max(0.0, second / horizon);
}

double derivative_energy(const RiskTrajectory& traj) {
  traj.validate();
  double total = 0.0;
  for (std::size_t i = 1; i < traj.times.size(); ++i) {
    const double dr = traj.values[i] - traj.values[i - 1];
    total += dr * dr / (traj.times[i] - traj.times[i - 1]);
  }
  return total;
}

PoincareCheck check_poincare(const RiskTrajectory& traj) {
  PoincareCheck c;
  c.volatility = volatility(traj);
  c.rhs = traj.horizon() / (std::numbers::pi * std::numbers::pi) * derivative_energy(traj);
  c.holds = c.volatility <= c.rhs * (1.0 + kPoincareSlack);
  return c;
}

void DeploymentPath::validate(std::size_t input_dim) const {
  if (samples.size() != times.size() || velocities.size() != times.size())
    throw ShapeError("deployment path: samples/velocities not aligned with times");
  if (times.size() < 2) throw ValidationError("deployment path needs at least two times");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (samples[i].rows() != velocities[i].rows() || samples[i].cols() != velocities[i].cols())
      throw ShapeError(fmt::format("deployment path: sample/velocity shape mismatch at time index {}", i));
    if (samples[i].cols() != input_dim) throw ShapeError("deployment path: wrong feature dimension");
    if (samples[i].rows() == 0) throw ValidationError("deployment path: empty sample batch");
    if (i > 0 && !(times[i] > times[i - 1])) throw ValidationError("deployment path times must increase");
  }
}

double jv_energy(const MlpModel& model, const DeploymentPath& path) {
  path.validate(model.input_dim());
  Vector per_time(path.times.size());
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const Vector d = jvp(model, DualBatch{path.samples[i], path.velocities[i]});
    double s = 0.0;
    for (double x : d) s += x * x;
    per_time[i] = s / static_cast<double>(d.size());
  }
  return trapezoid(path.times, per_time);
}

LowRankTerms lowrank_terms(const MlpModel& model, const DeploymentPath& path, const DriftSubspace& v) {
  path.validate(model.input_dim());
  v.validate();
  if (v.dim() != model.input_dim()) throw ShapeError("drift subspace dimension differs from model input");
  const std::size_t k = v.rank();
  const std::size_t d = v.dim();
  Vector bv_t(path.times.size()), brho_t(path.times.size());
  std::vector<Vector> directions;
  for (std::size_t j = 0; j < k; ++j) directions.push_back(v.direction(j));

  for (std::size_t t = 0; t < path.times.size(); ++t) {
    const Matrix& x = path.samples[t];
    const Matrix& xdot = path.velocities[t];
    const std::size_t n = x.rows();
    // ‖J_f V‖_F² per row.
    Vector jv_frob(n, 0.0);
    for (const auto& dir : directions) {
      const Vector g = jvp(model, x, dir);
      for (std::size_t r = 0; r < n; ++r) jv_frob[r] += g[r] * g[r];
    }
    Matrix rho(n, d);
    Vector a_norm2(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      auto vel = xdot.row(r);
      auto res = rho.row(r);
      std::copy(vel.begin(), vel.end(), res.begin());
      for (const auto& dir : directions) {
        const double a = dot(dir, vel);
        a_norm2[r] += a * a;
        for (std::size_t c = 0; c < d; ++c) res[c] -= a * dir[c];
      }
    }
    const Vector grho = jvp(model, DualBatch{x, rho});
    double bv = 0.0, br = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      bv += jv_frob[r] * a_norm2[r];
      br += grho[r] * grho[r];
    }
    bv_t[t] = bv / static_cast<double>(n);
    brho_t[t] = br / static_cast<double>(n);
  }
  return {trapezoid(path.times, bv_t), trapezoid(path.times, brho_t)};
}

BetaEstimate beta_for_loss(LossKind kind, std::span<const double> scores, std::span<const double> targets) {
  if (kind == LossKind::bce_logit) return {1.0, false};
  if (scores.size() != targets.size()) throw ShapeError("beta_for_loss: scores/targets length mismatch");
  if (scores.empty()) throw ValidationError("beta_for_loss: mse needs an evaluation set for the empirical sup");
  double sup = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) sup = std::max(sup, 2.0 * std::abs(scores[i] - targets[i]));
  return {sup, true};
}

BoundReport make_bound_report(const RiskTrajectory& traj, double jv_energy_value, const LowRankTerms& lowrank,
                              const BetaEstimate& beta) {
  BoundReport r;
  const PoincareCheck pc = check_poincare(traj);
  const double t_over_pi2 = traj.horizon() / (std::numbers::pi * std::numbers::pi);
  r.volatility = pc.volatility;
  r.derivative_energy = derivative_energy(traj);
  r.poincare_rhs = pc.rhs;
  r.horizon = traj.horizon();
  r.jv_energy = jv_energy_value;
  r.beta = beta.value;
  r.beta_empirical = beta.empirical;
  r.b_v = lowrank.b_v;
  r.b_rho = lowrank.b_rho;
  r.jv_rhs = beta.value * beta.value * t_over_pi2 * jv_energy_value;
  r.lowrank_rhs = 2.0 * beta.value * beta.value * t_over_pi2 * (lowrank.b_v + lowrank.b_rho);
  r.holds_poincare = pc.holds;
  r.holds_jv = r.volatility <= r.jv_rhs * (1.0 + kPoincareSlack);
  r.holds_lowrank = r.volatility <= r.lowrank_rhs * (1.0 + kPoincareSlack);
  return r;
}

BoundReport evaluate_bounds(const MlpModel& model, const RiskTrajectory& traj, const DeploymentPath& path,
                            const DriftSubspace& v, const BetaEstimate& beta) {
  return make_bound_report(traj, jv_energy(model, path), lowrank_terms(model, path, v), beta);
}

std::string bound_report_json(const BoundReport& r) {
  nlohmann::ordered_json j;
  j["volatility"] = r.volatility;
  j["derivative_energy"] = r.derivative_energy;
  j["jv_energy"] = r.jv_energy;
  j["beta"] = r.beta;
  j["beta_empirical"] = r.beta_empirical;
  j["b_v"] = r.b_v;
  j["b_rho"] = r.b_rho;
  j["horizon"] = r.horizon;
  j["poincare_rhs"] = r.poincare_rhs;
  j["jv_rhs"] = r.jv_rhs;
  j["lowrank_rhs"] = r.lowrank_rhs;
  j["holds"] = {{"poincare", r.holds_poincare}, {"jacobian_velocity", r.holds_jv}, {"low_rank", r.holds_lowrank}};
  return j.dump(2);
}

BoundReport bound_report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  BoundReport r;
  r.volatility = j.at("volatility").get<double>();
  r.derivative_energy = j.at("derivative_energy").get<double>();
  r.jv_energy = j.at("jv_energy").get<double>();
  r.beta = j.at("beta").get<double>();
  r.beta_empirical = j.at("beta_empirical").get<bool>();
  r.b_v = j.at("b_v").get<double>();
  r.b_rho = j.at("b_rho").get<double>();
  r.horizon = j.at("horizon").get<double>();
  r.poincare_rhs = j.at("poincare_rhs").get<double>();
  r.jv_rhs = j.at("jv_rhs").get<double>();
  r.lowrank_rhs = j.at("lowrank_rhs").get<double>();
  r.holds_poincare = j.at("holds").at("poincare").get<bool>();
  r.holds_jv = j.at("holds").at("jacobian_velocity").get<bool>();
  r.holds_lowrank = j.at("holds").at("low_rank").get<bool>();
  return r;
}

}  // namespace driftguard
