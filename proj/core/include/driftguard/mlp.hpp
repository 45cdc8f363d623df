#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "driftguard/drift_geometry.hpp"
#include "driftguard/linalg.hpp"
#include "driftguard/rng.hpp"

namespace driftguard {

/// Feedforward ReLU network with a scalar output.
///
/// weights[l] is layer_dims[l+1] × layer_dims[l]; hidden layers apply ReLU
/// (with ReLU'(0) = 0), the output layer is affine.
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Flat view over all parameters, layer by layer, weights (row-major) then bias.
  double& parameter(std::size_t flat_index);
  double parameter(std::size_t flat_index) const;

  /// Throws ShapeError/ValidationError on any broken invariant.
  void validate() const;

  static MlpModel zeros(std::vector<std::size_t> dims);
  /// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
  static MlpModel glorot(std::vector<std::size_t> dims, Rng& rng);

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Primal and tangent rows carried together through the forward pass.
struct DualBatch {
  Matrix primal;
  Matrix tangent;
};

/// Parameter gradients congruent to an MlpModel, plus the objective value.
struct GradBundle {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;
  double value = 0.0;

  static GradBundle zeros_like(const MlpModel& model);
  void add_scaled(const GradBundle& other, double scale);
  double parameter(std::size_t flat_index) const;
  bool all_finite() const;

  friend bool operator==(const GradBundle&, const GradBundle&) = default;
};

/// Layer activations kept for the backward pass. activations[0] is the input,
/// activations[l] for 0 < l < L the post-ReLU hidden values, activations[L] the
/// n×1 output scores.
struct ForwardTrace {
  std::vector<Matrix> activations;
  std::span<const double> scores() const { return activations.back().data(); }
};

ForwardTrace forward_trace(const MlpModel& model, const Matrix& x);
Vector forward(const MlpModel& model, const Matrix& x);

/// Reverse pass for a given adjoint on the output scores (∂objective/∂score_i).
/// The returned value field is left at zero.
GradBundle backprop(const MlpModel& model, const ForwardTrace& trace, std::span<const double> score_adjoint);

/// ∇f(x) by reverse mode through the activation pattern at x.
Vector input_gradient(const MlpModel& model, std::span<const double> x);
/// Row i is ∇f(x_i).
Matrix input_gradients(const MlpModel& model, const Matrix& x);

/// Per-row ∇f(primal_i)·tangent_i by forward-mode propagation.
Vector jvp(const MlpModel& model, const DualBatch& batch);
/// Per-row ∇f(x_i)·v.
Vector jvp(const MlpModel& model, const Matrix& x, std::span<const double> v);

/// Gradient with respect to θ of mean_i Σ_k (∇f(x_i)·v_k)², treating the
/// ReLU activation pattern as locally constant. `value` holds the penalty.
GradBundle penalty_param_gradient(const MlpModel& model, const Matrix& x, const DriftSubspace& v);

/// Same penalty, value only.
double directional_penalty(const MlpModel& model, const Matrix& x, const DriftSubspace& v);

/// Text checkpoint: header, layer_dims, then every parameter as a C99 hex
/// float so that save/load round trips are bit-exact.
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);
std::string serialize_model(const MlpModel& model);
MlpModel deserialize_model(const std::string& text);

}  // namespace driftguard
