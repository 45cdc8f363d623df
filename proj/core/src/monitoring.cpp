#include "driftguard/monitoring.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "driftguard/drift_geometry.hpp"
#include "driftguard/error.hpp"

namespace driftguard {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_square(const Vector& xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return s / static_cast<double>(xs.size());
}

std::string csv_number(double x) { return std::isnan(x) ? "nan" : fmt::format("{:.17g}", x); }

}  // namespace

Vector trailing_valid_mean(const Vector& values, const std::vector<bool>& valid, std::size_t window) {
  if (values.size() != valid.size()) throw ShapeError("trailing_valid_mean: length mismatch");
  Vector out(values.size(), kNaN);
  std::vector<double> recent;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid[i]) recent.push_back(values[i]);
    if (valid[i] && recent.size() >= window) {
      double s = 0.0;
      for (std::size_t j = recent.size() - window; j < recent.size(); ++j) s += recent[j];
      out[i] = s / static_cast<double>(window);
    }
  }
  return out;
}

HazardTrace hazard_trace(const MlpModel& model, const std::vector<Matrix>& blocks, std::size_t delta) {
  if (delta < 1) throw ValidationError("hazard lag must be at least one block");
  if (blocks.size() < delta + 1) throw ValidationError("hazard trace needs at least two blocks");
  std::vector<Vector> means;
  for (const auto& b : blocks) {
    if (b.rows() == 0) throw ValidationError("hazard trace: empty block");
    if (b.cols() != model.input_dim()) throw ShapeError("hazard trace: block dimension differs from model input");
    means.push_back(column_means(b));
  }
  HazardTrace tr;
  const double lag = static_cast<double>(delta);
  for (std::size_t t = delta; t < blocks.size(); ++t) {
    tr.block_index.push_back(t);
    const Vector diff = subtract(means[t], means[t - delta]);
    const double shift = norm(diff);
    if (!(shift > kNoDriftTolerance)) {
      tr.s.push_back(kNaN);
      tr.v.emplace_back();
      tr.g.push_back(kNaN);
      tr.h.push_back(kNaN);
      tr.valid.push_back(false);
      continue;
    }
    Vector dir = scaled(diff, 1.0 / shift);
    const double speed = shift / lag;
    const double gain = mean_square(jvp(model, blocks[t], dir));
    tr.s.push_back(speed);
    tr.v.push_back(std::move(dir));
    tr.g.push_back(gain);
    tr.h.push_back(speed * speed * gain);
    tr.valid.push_back(true);
  }
  tr.roll2_h = trailing_valid_mean(tr.h, tr.valid, 2);
  tr.roll3_h = trailing_valid_mean(tr.h, tr.valid, 3);
  return tr;
}

std::string hazard_csv(const HazardTrace& trace) {
  std::string out = "block_index,s,g,h,roll2_h,roll3_h,valid\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out += fmt::format("{},{},{},{},{},{},{}\n", trace.block_index[i], csv_number(trace.s[i]), csv_number(trace.g[i]),
                       csv_number(trace.h[i]), csv_number(trace.roll2_h[i]), csv_number(trace.roll3_h[i]),
                       trace.valid[i] ? 1 : 0);
  return out;
}

void write_hazard_csv(const HazardTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << hazard_csv(trace);
}

DriftSplit split_drift(std::span<const double> velocity, std::span<const double> v_ref) {
  DriftSplit s;
  s.abar = dot(velocity, v_ref);
  s.rho.assign(velocity.begin(), velocity.end());
  for (std::size_t i = 0; i < s.rho.size(); ++i) s.rho[i] -= s.abar * v_ref[i];
  return s;
}

HazardDecomposition decompose_hazard(const MlpModel& model, const Matrix& block_samples, std::span<const double> v_t,
                                     std::span<const double> v_ref, double abar, std::span<const double> rho) {
  const std::size_t d = model.input_dim();
  if (v_t.size() != d || v_ref.size() != d || rho.size() != d) throw ShapeError("decompose_hazard: dimension mismatch");
  if (std::abs(norm(v_t) - 1.0) > 1e-10 || std::abs(norm(v_ref) - 1.0) > 1e-10)
    throw ValidationError("decompose_hazard: directions must be unit vectors");
  if (std::abs(dot(rho, v_ref)) > 1e-10 * std::max(1.0, norm(rho)))
    throw ValidationError("decompose_hazard: residual drift not orthogonal to reference direction");

  HazardDecomposition out;
  out.abar = abar;
  out.rho_norm = norm(rho);
  out.s2 = abar * abar + out.rho_norm * out.rho_norm;

  const double cos_t = dot(v_t, v_ref);
  Vector w(v_t.begin(), v_t.end());
  for (std::size_t i = 0; i < d; ++i) w[i] -= cos_t * v_ref[i];
  double sin_t = norm(w);
  if (sin_t > 1e-14) {
    out.u = scaled(w, 1.0 / sin_t);
  } else {
    // v_t ∈ span(v_ref): any unit u ⊥ v_ref will do.
    std::size_t j = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(v_ref[i]) < std::abs(v_ref[j])) j = i;
    Vector e(d, 0.0);
    e[j] = 1.0;
    const double c = dot(e, v_ref);
    for (std::size_t i = 0; i < d; ++i) e[i] -= c * v_ref[i];
    out.u = scaled(e, 1.0 / norm(e));
    sin_t = 0.0;
  }
  out.theta = std::atan2(sin_t, cos_t);
  const double ct = cos_t, st = sin_t;

  const Vector gv = jvp(model, block_samples, v_ref);
  const Vector gu = jvp(model, block_samples, out.u);
  const Vector gt = jvp(model, block_samples, v_t);
  const double n = static_cast<double>(block_samples.rows());
  for (std::size_t r = 0; r < block_samples.rows(); ++r) {
    out.g_par += gv[r] * gv[r] / n;
    out.g_perp += gu[r] * gu[r] / n;
    out.c_overlap += gv[r] * gu[r] / n;
    out.g_direct += gt[r] * gt[r] / n;
  }
  out.g_reconstructed = ct * ct * out.g_par + st * st * out.g_perp + 2.0 * st * ct * out.c_overlap;
  if (std::abs(out.g_reconstructed - out.g_direct) > 1e-10 * std::max(1.0, out.g_direct))
    throw NumericalError(fmt::format("hazard decomposition mismatch: reconstructed {:.17g} vs direct {:.17g}",
                                     out.g_reconstructed, out.g_direct));
  return out;
}

}  // namespace driftguard
