#include "driftguard/mlp.hpp"

#include <cmath>

#include <fmt/format.h>

#include "driftguard/error.hpp"

namespace driftguard {

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

namespace {

template <typename Ws, typename Bs>
auto& locate(Ws& weights, Bs& biases, std::size_t flat_index) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (flat_index < weights[l].size()) return weights[l].data()[flat_index];
    flat_index -= weights[l].size();
    if (flat_index < biases[l].size()) return biases[l][flat_index];
    flat_index -= biases[l].size();
  }
  throw ShapeError("parameter index out of range");
}

bool is_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

double& MlpModel::parameter(std::size_t flat_index) { return locate(weights, biases, flat_index); }
double MlpModel::parameter(std::size_t flat_index) const { return locate(weights, biases, flat_index); }

void MlpModel::validate() const {
  if (layer_dims.size() < 2) throw ShapeError("MLP needs at least input and output dimensions");
  for (auto d : layer_dims)
    if (d == 0) throw ShapeError("MLP layer dimension must be positive");
  if (layer_dims.back() != 1) throw ShapeError("MLP output dimension must be 1");
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
    throw ShapeError("MLP layer count does not match layer_dims");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l])
      throw ShapeError(fmt::format("weights[{}] has shape {}x{}, expected {}x{}", l, weights[l].rows(),
                                   weights[l].cols(), layer_dims[l + 1], layer_dims[l]));
    if (biases[l].size() != layer_dims[l + 1]) throw ShapeError(fmt::format("biases[{}] has wrong length", l));
    if (!is_finite(weights[l].data()) || !is_finite(biases[l]))
      throw ValidationError(fmt::format("layer {} has non-finite parameters", l));
  }
}

MlpModel MlpModel::zeros(std::vector<std::size_t> dims) {
  MlpModel m;
  m.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    m.weights.emplace_back(m.layer_dims[l + 1], m.layer_dims[l]);
    m.biases.emplace_back(m.layer_dims[l + 1], 0.0);
  }
  m.validate();
  return m;
}

MlpModel MlpModel::glorot(std::vector<std::size_t> dims, Rng& rng) {
  MlpModel m = zeros(std::move(dims));
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.layer_dims[l] + m.layer_dims[l + 1]));
    for (auto& w : m.weights[l].data()) w = rng.uniform(-limit, limit);
  }
  return m;
}

GradBundle GradBundle::zeros_like(const MlpModel& model) {
  GradBundle g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.d_weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    g.d_biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return g;
}

void GradBundle::add_scaled(const GradBundle& other, double scale) {
  if (other.d_weights.size() != d_weights.size()) throw ShapeError("GradBundle layer mismatch");
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    auto dst = d_weights[l].data();
    auto src = other.d_weights[l].data();
    if (dst.size() != src.size() || d_biases[l].size() != other.d_biases[l].size())
      throw ShapeError("GradBundle shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    for (std::size_t i = 0; i < d_biases[l].size(); ++i) d_biases[l][i] += scale * other.d_biases[l][i];
  }
  value += scale * other.value;
}

double GradBundle::parameter(std::size_t flat_index) const { return locate(d_weights, d_biases, flat_index); }

bool GradBundle::all_finite() const {
  for (std::size_t l = 0; l < d_weights.size(); ++l)
    if (!is_finite(d_weights[l].data()) || !is_finite(d_biases[l])) return false;
  return std::isfinite(value);
}

namespace {

void check_input(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim())
    throw ShapeError(fmt::format("input has {} columns, model expects {}", x.cols(), model.input_dim()));
}

// out = in·Wᵀ + b, then ReLU when `hidden`.
void dense_forward(const Matrix& in, const Matrix& w, const Vector& b, bool hidden, Matrix& out) {
  const std::size_t n = in.rows(), fan_in = w.cols(), fan_out = w.rows();
  out = Matrix(n, fan_out);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = in.row(r).data();
    double* yr = out.row(r).data();
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double* wo = w.row(o).data();
      double s = b[o];
      for (std::size_t i = 0; i < fan_in; ++i) s += wo[i] * xr[i];
      yr[o] = (hidden && !(s > 0.0)) ? 0.0 : s;
    }
  }
}

// Tangent step: out = (in·Wᵀ) ⊙ mask, mask taken from the primal activation.
void dense_tangent(const Matrix& in, const Matrix& w, const Matrix* mask_from, Matrix& out) {
  const std::size_t n = in.rows(), fan_in = w.cols(), fan_out = w.rows();
  out = Matrix(n, fan_out);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = in.row(r).data();
    double* yr = out.row(r).data();
    const double* mr = mask_from ? mask_from->row(r).data() : nullptr;
    for (std::size_t o = 0; o < fan_out; ++o) {
      if (mr && !(mr[o] > 0.0)) {
        yr[o] = 0.0;
        continue;
      }
      const double* wo = w.row(o).data();
      double s = 0.0;
      for (std::size_t i = 0; i < fan_in; ++i) s += wo[i] * xr[i];
      yr[o] = s;
    }
  }
}

// Given adjoint `adj` (n×fan_out) on a layer's pre-activation, accumulate
// dW += adjᵀ·in and return the adjoint on `in` masked by `mask_from` (if any).
Matrix dense_backward(const Matrix& adj, const Matrix& in, const Matrix& w, const Matrix* mask_from, Matrix& d_w,
                      Vector* d_b, bool want_input_adjoint) {
  const std::size_t n = adj.rows(), fan_in = w.cols(), fan_out = w.rows();
  Matrix in_adj;
  if (want_input_adjoint) in_adj = Matrix(n, fan_in);
  for (std::size_t r = 0; r < n; ++r) {
    const double* ar = adj.row(r).data();
    const double* xr = in.row(r).data();
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double a = ar[o];
      if (a == 0.0) continue;
      double* dwo = d_w.row(o).data();
      for (std::size_t i = 0; i < fan_in; ++i) dwo[i] += a * xr[i];
      if (d_b) (*d_b)[o] += a;
      if (want_input_adjoint) {
        const double* wo = w.row(o).data();
        double* ir = in_adj.row(r).data();
        for (std::size_t i = 0; i < fan_in; ++i) ir[i] += a * wo[i];
      }
    }
    if (want_input_adjoint && mask_from) {
      double* ir = in_adj.row(r).data();
      const double* mr = mask_from->row(r).data();
      for (std::size_t i = 0; i < fan_in; ++i)
        if (!(mr[i] > 0.0)) ir[i] = 0.0;
    }
  }
  return in_adj;
}

}  // namespace

ForwardTrace forward_trace(const MlpModel& model, const Matrix& x) {
  check_input(model, x);
  ForwardTrace trace;
  const std::size_t layers = model.num_layers();
  trace.activations.resize(layers + 1);
  trace.activations[0] = x;
  for (std::size_t l = 0; l < layers; ++l)
    dense_forward(trace.activations[l], model.weights[l], model.biases[l], l + 1 < layers,
                  trace.activations[l + 1]);
  return trace;
}

Vector forward(const MlpModel& model, const Matrix& x) {
  const auto trace = forward_trace(model, x);
  const auto s = trace.scores();
  return Vector(s.begin(), s.end());
}

GradBundle backprop(const MlpModel& model, const ForwardTrace& trace, std::span<const double> score_adjoint) {
  const std::size_t layers = model.num_layers();
  const std::size_t n = trace.activations[0].rows();
  if (score_adjoint.size() != n) throw ShapeError("score adjoint length differs from batch size");
  GradBundle g = GradBundle::zeros_like(model);
  Matrix adj = Matrix::column(score_adjoint);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix* mask = l > 0 ? &trace.activations[l] : nullptr;
    adj = dense_backward(adj, trace.activations[l], model.weights[l], mask, g.d_weights[l], &g.d_biases[l], l > 0);
  }
  return g;
}

Matrix input_gradients(const MlpModel& model, const Matrix& x) {
  const auto trace = forward_trace(model, x);
  const std::size_t layers = model.num_layers();
  Matrix adj(x.rows(), 1, 1.0);
  GradBundle scratch = GradBundle::zeros_like(model);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix* mask = l > 0 ? &trace.activations[l] : nullptr;
    adj = dense_backward(adj, trace.activations[l], model.weights[l], mask, scratch.d_weights[l], nullptr, true);
  }
  return adj;
}

Vector input_gradient(const MlpModel& model, std::span<const double> x) {
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.data().begin());
  const Matrix g = input_gradients(model, row);
  return Vector(g.row(0).begin(), g.row(0).end());
}

namespace {

// Forward-mode pass: returns per-layer tangents (tangents[0] = input tangent).
std::vector<Matrix> tangent_pass(const MlpModel& model, const ForwardTrace& trace, const Matrix& input_tangent) {
  const std::size_t layers = model.num_layers();
  std::vector<Matrix> tangents(layers + 1);
  tangents[0] = input_tangent;
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix* mask = l + 1 < layers ? &trace.activations[l + 1] : nullptr;
    dense_tangent(tangents[l], model.weights[l], mask, tangents[l + 1]);
  }
  return tangents;
}

Matrix broadcast_rows(std::size_t n, std::span<const double> v) {
  Matrix m(n, v.size());
  for (std::size_t r = 0; r < n; ++r) std::copy(v.begin(), v.end(), m.row(r).begin());
  return m;
}

}  // namespace

Vector jvp(const MlpModel& model, const DualBatch& batch) {
  check_input(model, batch.primal);
  if (batch.tangent.rows() != batch.primal.rows() || batch.tangent.cols() != batch.primal.cols())
    throw ShapeError("dual batch primal/tangent shapes differ");
  const auto trace = forward_trace(model, batch.primal);
  const auto tangents = tangent_pass(model, trace, batch.tangent);
  const auto out = tangents.back().data();
  return Vector(out.begin(), out.end());
}

Vector jvp(const MlpModel& model, const Matrix& x, std::span<const double> v) {
  check_input(model, x);
  if (v.size() != model.input_dim()) throw ShapeError("direction length differs from input dimension");
  return jvp(model, DualBatch{x, broadcast_rows(x.rows(), v)});
}

GradBundle penalty_param_gradient(const MlpModel& model, const Matrix& x, const DriftSubspace& v) {
  check_input(model, x);
  v.validate();
  if (v.dim() != model.input_dim()) throw ShapeError("drift subspace dimension differs from model input");
  if (x.rows() == 0) throw ValidationError("penalty needs a nonempty batch");

  const std::size_t layers = model.num_layers();
  const std::size_t n = x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto trace = forward_trace(model, x);
  GradBundle g = GradBundle::zeros_like(model);

  for (std::size_t k = 0; k < v.rank(); ++k) {
    const Vector dir = v.direction(k);
    const auto tangents = tangent_pass(model, trace, broadcast_rows(n, dir));
    const auto out = tangents.back().data();
    Matrix adj(n, 1);
    for (std::size_t r = 0; r < n; ++r) {
      g.value += out[r] * out[r] * inv_n;
      adj(r, 0) = 2.0 * out[r] * inv_n;
    }
    // Reverse over the tangent chain; masks are constant so biases get nothing.
    for (std::size_t l = layers; l-- > 0;) {
      const Matrix* mask = l > 0 ? &trace.activations[l] : nullptr;
      adj = dense_backward(adj, tangents[l], model.weights[l], mask, g.d_weights[l], nullptr, l > 0);
    }
  }
  return g;
}

double directional_penalty(const MlpModel& model, const Matrix& x, const DriftSubspace& v) {
  check_input(model, x);
  v.validate();
  if (x.rows() == 0) throw ValidationError("penalty needs a nonempty batch");
  const auto trace = forward_trace(model, x);
  double total = 0.0;
  for (std::size_t k = 0; k < v.rank(); ++k) {
    const Vector dir = v.direction(k);
    const auto tangents = tangent_pass(model, trace, broadcast_rows(x.rows(), dir));
    for (double s : tangents.back().data()) total += s * s;
  }
  return total / static_cast<double>(x.rows());
}

}  // namespace driftguard
