#include "driftguard/drift_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "driftguard/error.hpp"

namespace driftguard {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::true_axis: return "true_axis";
    case Provenance::mean_diff: return "mean_diff";
    case Provenance::diff_pca: return "diff_pca";
    case Provenance::target_orthogonal_sensor: return "target_orthogonal_sensor";
    case Provenance::rotated: return "rotated";
    case Provenance::identity: return "identity";
  }
  return "unknown";
}

void DriftSubspace::validate(double tol) const {
  const std::size_t d = basis.rows();
  const std::size_t k = basis.cols();
  if (k < 1 || k > d) throw ValidationError(fmt::format("drift subspace rank {} outside [1, {}]", k, d));
  for (double x : basis.data())
    if (!std::isfinite(x)) throw ValidationError("drift subspace basis has non-finite entries");
  const double defect = orthonormality_defect(basis);
  if (defect > tol)
    throw ValidationError(fmt::format("drift subspace basis not orthonormal (defect {:.3e})", defect));
}

DriftSubspace DriftSubspace::from_direction(std::span<const double> v, Provenance p) {
  DriftSubspace s;
  s.basis = Matrix::column(v);
  s.provenance = p;
  return s;
}

DriftSubspace DriftSubspace::axis(std::size_t d, std::size_t axis_index) {
  if (axis_index >= d) throw ValidationError("axis index out of range");
  Vector e(d, 0.0);
  e[axis_index] = 1.0;
  return from_direction(e, Provenance::true_axis);
}

DriftSubspace DriftSubspace::full_identity(std::size_t d) {
  DriftSubspace s;
  s.basis = Matrix::identity(d);
  s.provenance = Provenance::identity;
  return s;
}

Vector mean_diff_direction(std::span<const double> mu_t, std::span<const double> mu_prev) {
  Vector diff = subtract(mu_t, mu_prev);
  const double n = norm(diff);
  if (!(n > kNoDriftTolerance))
    throw NoDriftError(fmt::format("mean difference norm {:.3e} below {:.0e}", n, kNoDriftTolerance));
  for (auto& x : diff) x /= n;
  return diff;
}

void apply_sign_convention(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (!v.empty() && v[best] < 0.0)
    for (auto& x : v) x = -x;
}

namespace {

void orthogonalize(Vector& w, const std::vector<EigenPair>& found) {
  for (const auto& p : found) {
    const double c = dot(w, p.vector);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * p.vector[i];
  }
}

}  // namespace

std::vector<EigenPair> top_eigenpairs(const Matrix& gram, std::size_t k, std::optional<double> scale,
                                      const PowerIterationOptions& opts) {
  const std::size_t d = gram.rows();
  if (gram.cols() != d) throw ShapeError("top_eigenpairs: matrix must be square");
  if (k < 1 || k > d) throw ValidationError(fmt::format("top_eigenpairs: k={} outside [1, {}]", k, d));

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += gram(i, i);
  const double zero_level = opts.rank_tolerance * scale.value_or(trace);

  Matrix g = gram;
  std::vector<EigenPair> found;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (g(i, i) > g(start, start)) start = i;
    if (!(g(start, start) > zero_level))
      throw RankError(fmt::format("difference cloud has numerical rank {} < requested {}", j, k), j);

    Vector v = g.col(start);
    orthogonalize(v, found);
    double nv = norm(v);
    if (!(nv > 0.0)) {
      v.assign(d, 0.0);
      v[start] = 1.0;
      orthogonalize(v, found);
      nv = norm(v);
    }
    for (auto& x : v) x /= nv;

    double lambda = dot(v, matvec(g, v));
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
      Vector w = matvec(g, v);
      orthogonalize(w, found);
      const double nw = norm(w);
      if (!(nw > 0.0)) {
        lambda = 0.0;
        break;
      }
      for (auto& x : w) x /= nw;
      const double lambda_new = dot(w, matvec(g, w));
      double step = 0.0;
      for (std::size_t i = 0; i < d; ++i) step = std::max(step, std::abs(w[i] - v[i]));
      const bool value_done = std::abs(lambda_new - lambda) <= opts.relative_tolerance * std::abs(lambda_new);
      v = std::move(w);
      lambda = lambda_new;
      if (value_done && step <= opts.vector_tolerance) break;
    }
    if (!(lambda > zero_level))
      throw RankError(fmt::format("difference cloud has numerical rank {} < requested {}", j, k), j);

    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) g(r, c) -= lambda * v[r] * v[c];
    found.push_back({lambda, std::move(v)});
  }
  for (auto& p : found) apply_sign_convention(p.vector);
  return found;
}

DriftSubspace diff_cloud_pca(const Matrix& diffs, std::size_t k) {
  if (diffs.rows() < k || k < 1)
    throw ValidationError(fmt::format("diff_cloud_pca needs n >= k >= 1 (n={}, k={})", diffs.rows(), k));
  const Matrix gram = matmul_tn(diffs, diffs);
  const auto pairs = top_eigenpairs(gram, k);
  DriftSubspace s;
  s.basis = Matrix(diffs.cols(), k);
  for (std::size_t j = 0; j < k; ++j) s.basis.set_col(j, pairs[j].vector);
  s.provenance = Provenance::diff_pca;
  return s;
}

Matrix consecutive_shifts(const std::vector<Vector>& block_means) {
  if (block_means.size() < 2) throw ValidationError("need at least two block means");
  std::vector<Vector> rows;
  for (std::size_t t = 1; t < block_means.size(); ++t) rows.push_back(subtract(block_means[t], block_means[t - 1]));
  return Matrix::from_rows(rows);
}

TargetOrthogonalResult target_orthogonal_sensor_subspace(const Matrix& train_x, std::span<const double> train_y,
                                                         const std::vector<Vector>& deploy_block_means,
                                                         std::span<const std::size_t> sensor_cols, std::size_t k) {
  const std::size_t d = train_x.cols();
  if (sensor_cols.empty()) throw ValidationError("sensor column set is empty");
  for (auto c : sensor_cols)
    if (c >= d) throw ValidationError(fmt::format("sensor column {} out of range (d={})", c, d));
  if (deploy_block_means.size() < 3) throw ValidationError("need at least three deployment blocks");
  if (train_x.rows() != train_y.size()) throw ShapeError("train_x / train_y row mismatch");
  if (train_x.rows() == 0) throw ValidationError("empty training window");

  // OLS with intercept on the sensor columns (centered normal equations).
  const Matrix xs = select_columns(train_x, sensor_cols);
  const std::size_t m = xs.cols();
  const Vector mu = column_means(xs);
  double ybar = 0.0;
  for (double y : train_y) ybar += y;
  ybar /= static_cast<double>(train_y.size());

  Matrix gram(m, m);
  Vector rhs(m, 0.0);
  for (std::size_t r = 0; r < xs.rows(); ++r) {
    const double yc = train_y[r] - ybar;
    for (std::size_t i = 0; i < m; ++i) {
      const double xi = xs(r, i) - mu[i];
      rhs[i] += xi * yc;
      for (std::size_t j = 0; j < m; ++j) gram(i, j) += xi * (xs(r, j) - mu[j]);
    }
  }
  Vector beta;
  bool ridge = false;
  if (!cholesky_solve(gram, rhs, beta)) {
    ridge = true;
    for (std::size_t i = 0; i < m; ++i) gram(i, i) += 1e-8;
    if (!cholesky_solve(gram, rhs, beta)) throw NumericalError("OLS failed even with ridge 1e-8");
  }
  const double bnorm = norm(beta);
  if (!(bnorm > 0.0)) throw NumericalError("OLS target direction is zero");
  Vector u = scaled(beta, 1.0 / bnorm);

  std::vector<Vector> projected;
  double scale = 0.0;
  for (std::size_t t = 1; t < deploy_block_means.size(); ++t) {
    if (deploy_block_means[t].size() != d || deploy_block_means[t - 1].size() != d)
      throw ShapeError("block mean length differs from feature dimension");
    Vector shift(m);
    for (std::size_t i = 0; i < m; ++i)
      shift[i] = deploy_block_means[t][sensor_cols[i]] - deploy_block_means[t - 1][sensor_cols[i]];
    scale += squared_norm(shift);
    const double c = dot(shift, u);
    for (std::size_t i = 0; i < m; ++i) shift[i] -= c * u[i];
    projected.push_back(std::move(shift));
  }
  if (k > m) throw ValidationError(fmt::format("k={} exceeds sensor count {}", k, m));
  const Matrix p = Matrix::from_rows(projected);
  const auto pairs = top_eigenpairs(matmul_tn(p, p), k, scale, PowerIterationOptions{});

  TargetOrthogonalResult out;
  out.subspace.basis = Matrix(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    Vector col = pairs[j].vector;
    // Remove rounding-level leakage onto u, then renormalize.
    const double c = dot(col, u);
    for (std::size_t i = 0; i < m; ++i) col[i] -= c * u[i];
    const double n = norm(col);
    for (std::size_t i = 0; i < m; ++i) out.subspace.basis(sensor_cols[i], j) = col[i] / n;
  }
  out.subspace.provenance = Provenance::target_orthogonal_sensor;
  out.subspace.ridge_fallback = ridge;
  std::vector<std::size_t> blocks(deploy_block_means.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = i;
  out.subspace.window_blocks = blocks;
  out.target_direction.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) out.target_direction[sensor_cols[i]] = u[i];
  out.subspace.validate();
  return out;
}

Vector rotated_direction(double alpha_radians) { return {std::sin(alpha_radians), std::cos(alpha_radians)}; }

void write_subspace_csv(const DriftSubspace& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  for (std::size_t j = 0; j < v.rank(); ++j) out << (j ? "," : "") << "v" << j;
  out << '\n';
  for (std::size_t i = 0; i < v.dim(); ++i) {
    for (std::size_t j = 0; j < v.rank(); ++j) out << (j ? "," : "") << fmt::format("{:.17g}", v.basis(i, j));
    out << '\n';
  }
}

}  // namespace driftguard
