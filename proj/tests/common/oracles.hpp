#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the autodiff code it is used to check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "driftguard/drift_geometry.hpp"
#include "driftguard/linalg.hpp"
#include "driftguard/mlp.hpp"
#include "driftguard/monitoring.hpp"
#include "driftguard/objectives.hpp"
#include "driftguard/rng.hpp"

namespace oracle {

using driftguard::Matrix;
using driftguard::MlpModel;
using driftguard::Vector;

// Scalar-loop forward pass of one input. min_abs_pre receives the smallest
// |pre-activation| over hidden units.
inline double forward_one(const MlpModel& m, const std::vector<double>& x, double* min_abs_pre = nullptr) {
  std::vector<double> a = x;
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const Matrix& w = m.weights[l];
    std::vector<double> z(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double s = m.biases[l][i];
      for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * a[j];
      z[i] = s;
    }
    if (l + 1 < m.weights.size())
      for (auto& v : z) {
        closest = std::min(closest, std::abs(v));
        v = v > 0.0 ? v : 0.0;
      }
    a = std::move(z);
  }
  if (min_abs_pre) *min_abs_pre = closest;
  return a[0];
}

inline std::vector<double> row(const Matrix& x, std::size_t i) {
  return {x.row(i).begin(), x.row(i).end()};
}

// Smallest |pre-activation| over a batch: finite differences are only
// meaningful when no unit sits near its kink.
inline double kink_margin(const MlpModel& m, const Matrix& x) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mi = 0.0;
    forward_one(m, row(x, i), &mi);
    margin = std::min(margin, mi);
  }
  return margin;
}

// Central-difference input gradient of the scalar-loop forward.
inline std::vector<double> fd_input_gradient(const MlpModel& m, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    const double up = forward_one(m, x);
    x[j] = x0 - h;
    const double down = forward_one(m, x);
    x[j] = x0;
    g[j] = (up - down) / (2 * h);
  }
  return g;
}

// The naive penalty through explicit input gradients: Σ_k (∇f·v_k)², computed
// from the analytic input gradient of the scalar loop with a fixed pattern.
inline std::vector<double> pattern_gradient(const MlpModel& m, const std::vector<double>& x) {
  // Forward keeping masks.
  std::vector<std::vector<double>> masks;
  std::vector<double> a = x;
  for (std::size_t l = 0; l + 1 < m.weights.size(); ++l) {
    const Matrix& w = m.weights[l];
    std::vector<double> z(w.rows()), mask(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double s = m.biases[l][i];
      for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * a[j];
      mask[i] = s > 0.0 ? 1.0 : 0.0;
      z[i] = s * mask[i];
    }
    masks.push_back(mask);
    a = z;
  }
  // Row vector g = W_L D_{L-1} W_{L-1} ... D_1 W_1.
  std::vector<double> g(m.weights.back().cols());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = m.weights.back()(0, j);
  for (std::size_t l = m.weights.size() - 1; l-- > 0;) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= masks[l][i];
    const Matrix& w = m.weights[l];
    std::vector<double> next(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) next[j] += g[i] * w(i, j);
    g = next;
  }
  return g;
}

inline double penalty_naive(const MlpModel& m, const Matrix& x, const Matrix& basis) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto g = pattern_gradient(m, row(x, i));
    for (std::size_t k = 0; k < basis.cols(); ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) d += g[j] * basis(j, k);
      total += d * d;
    }
  }
  return total / static_cast<double>(x.rows());
}

inline double bce_naive(double s, double y) {
  const double p = 1.0 / (1.0 + std::exp(-s));
  return -(y * std::log(p) + (1 - y) * std::log(1 - p));
}

inline double mean_loss(driftguard::LossKind kind, const MlpModel& m, const Matrix& x, const Vector& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double s = forward_one(m, row(x, i));
    if (kind == driftguard::LossKind::mse) {
      total += (s - y[i]) * (s - y[i]);
    } else {
      // log(1 + e^{-|s|}) form, kept independent of the library expression.
      total += (s > 0 ? s : 0.0) - s * y[i] + std::log(1.0 + std::exp(-std::abs(s)));
    }
  }
  return total / static_cast<double>(x.rows());
}

// Central difference of a scalar objective in one parameter coordinate.
template <typename F>
double fd_parameter(MlpModel m, std::size_t index, double h, F&& objective) {
  const double p0 = m.parameter(index);
  m.parameter(index) = p0 + h;
  const double up = objective(m);
  m.parameter(index) = p0 - h;
  const double down = objective(m);
  return (up - down) / (2 * h);
}

// Relative agreement with a floor so exactly-zero coordinates compare absolutely.
inline bool close_relative(double fd, double analytic, double rel, double floor = 1e-6) {
  return std::abs(fd - analytic) <= rel * std::max({std::abs(fd), std::abs(analytic), floor});
}

// Random orthonormal d×k basis by Gram-Schmidt on normal draws.
inline Matrix random_basis(std::size_t d, std::size_t k, driftguard::Rng& rng) {
  Matrix b(d, k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (auto& e : v) e = rng.normal();
    for (std::size_t p = 0; p < c; ++p) {
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += v[j] * b(j, p);
      for (std::size_t j = 0; j < d; ++j) v[j] -= proj * b(j, p);
    }
    double n = 0.0;
    for (double e : v) n += e * e;
    n = std::sqrt(n);
    for (std::size_t j = 0; j < d; ++j) b(j, c) = v[j] / n;
  }
  return b;
}

// Model with Glorot weights and small random biases (so biases get nonzero
// gradients), and a batch whose pre-activations all keep a margin from zero.
struct Triple {
  MlpModel model;
  Matrix x;
  Vector y_binary;
  Vector y_real;
  driftguard::DriftSubspace v;
};

inline Triple random_triple(std::uint64_t seed, double min_margin = 1e-3) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    driftguard::Rng rng(seed * 1000 + attempt);
    const std::size_t d = 2 + rng.uniform_index(4);
    const std::size_t h1 = 3 + rng.uniform_index(6);
    const std::size_t h2 = 3 + rng.uniform_index(6);
    Triple t;
    t.model = MlpModel::glorot({d, h1, h2, 1}, rng);
    for (auto& b : t.model.biases)
      for (auto& e : b) e = rng.uniform(-0.3, 0.3);
    const std::size_t n = 4 + rng.uniform_index(5);
    t.x = Matrix(n, d);
    for (auto& e : t.x.data()) e = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      t.y_binary.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
      t.y_real.push_back(rng.normal());
    }
    const std::size_t k = 1 + rng.uniform_index(d);
    t.v.basis = random_basis(d, k, rng);
    t.v.provenance = driftguard::Provenance::mean_diff;
    if (kink_margin(t.model, t.x) > min_margin) return t;
  }
}

// One random instance of the rank-1 hazard bookkeeping: a velocity split
// against a random reference direction. Returns the largest deviation, relative
// to max(1, |value|), across the identities
//   s² = ā² + ‖ρ‖² = ‖ẋ‖²,  s·cosθ = ā,  s·sinθ = ‖ρ‖,
//   G_t = cos²θ G∥ + sin²θ G⊥ + 2 sinθ cosθ C = E(∇f·v_t)²,
//   h_t = s² G_t = E(∇f·ẋ)²,
// with the direct gain taken from the scalar-loop gradient.
inline double prop1_instance_error(std::uint64_t seed) {
  const Triple t = random_triple(seed, 0.0);
  driftguard::Rng rng(seed + 99991);
  const std::size_t d = t.x.cols();
  std::vector<double> xdot(d), ref(d);
  for (auto& e : xdot) e = rng.normal();
  for (auto& e : ref) e = rng.normal();
  const double rn = driftguard::norm(ref);
  for (auto& e : ref) e /= rn;
  const double speed = driftguard::norm(xdot);
  std::vector<double> v_t = xdot;
  for (auto& e : v_t) e /= speed;

  const auto split = driftguard::split_drift(xdot, ref);
  const auto dec = driftguard::decompose_hazard(t.model, t.x, v_t, ref, split.abar, split.rho);

  double g_direct = 0.0, h_direct = 0.0;
  for (std::size_t i = 0; i < t.x.rows(); ++i) {
    const auto g = pattern_gradient(t.model, row(t.x, i));
    double gv = 0.0, gx = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      gv += g[j] * v_t[j];
      gx += g[j] * xdot[j];
    }
    g_direct += gv * gv;
    h_direct += gx * gx;
  }
  g_direct /= static_cast<double>(t.x.rows());
  h_direct /= static_cast<double>(t.x.rows());

  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  double worst = 0.0;
  worst = std::max(worst, rel(dec.s2, speed * speed));
  worst = std::max(worst, rel(std::sqrt(dec.s2) * std::cos(dec.theta), split.abar));
  worst = std::max(worst, rel(std::sqrt(dec.s2) * std::sin(dec.theta), dec.rho_norm));
  worst = std::max(worst, rel(dec.g_reconstructed, g_direct));
  worst = std::max(worst, rel(dec.g_direct, g_direct));
  worst = std::max(worst, rel(dec.s2 * dec.g_reconstructed, h_direct));
  return worst;
}

}  // namespace oracle
