#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "driftguard/drift_geometry.hpp"
#include "driftguard/linalg.hpp"
#include "driftguard/mlp.hpp"

namespace driftguard {

enum class PenaltyKind { none, isotropic, dtr };
enum class LossKind { bce_logit, mse };

std::string to_string(PenaltyKind k);
std::string to_string(LossKind k);
PenaltyKind penalty_kind_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);

struct TrainConfig {
  double lambda = 0.0;
  PenaltyKind penalty_kind = PenaltyKind::none;
  LossKind loss_kind = LossKind::bce_logit;
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws ValidationError on negative lambda, non-positive sizes, or a
  /// dtr penalty without a subspace.
  void validate(bool has_subspace) const;
};

/// Mean loss over the batch. bce_logit uses max(s,0) − s·y + log1p(e^{−|s|}).
double loss(LossKind kind, std::span<const double> scores, std::span<const double> targets);
/// ∂loss/∂score_i for the mean loss.
Vector loss_score_gradient(LossKind kind, std::span<const double> scores, std::span<const double> targets);

/// Value and parameter gradient of the unpenalized loss.
GradBundle loss_objective(const MlpModel& model, const Matrix& x, std::span<const double> y, LossKind kind);

/// loss + λ·mean ‖J_f(x)V‖_F².
GradBundle dtr_objective(const MlpModel& model, const Matrix& x, std::span<const double> y, const DriftSubspace& v,
                         double lambda, LossKind kind = LossKind::bce_logit);

/// loss + λ·mean ‖∇f(x)‖², computed as d directional penalties along e_1..e_d.
GradBundle isotropic_objective(const MlpModel& model, const Matrix& x, std::span<const double> y, double lambda,
                               LossKind kind = LossKind::bce_logit);

/// Adam state over all parameters of one model.
class AdamOptimizer {
 public:
  AdamOptimizer(const MlpModel& model, double lr, double beta1, double beta2, double eps);
  void step(MlpModel& model, const GradBundle& grad);
  long steps() const { return t_; }

 private:
  GradBundle m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainingData {
  Matrix x;
  Vector y;
};

/// Called once per epoch with (epoch index, mean minibatch objective).
using EpochCallback = std::function<void(int, double)>;

/// Minibatch Adam for config.epochs epochs. Minibatch order comes from the
/// Stream::shuffle substream of config.seed, so equal seeds give identical
/// trajectories regardless of penalty. Throws NumericalError naming the epoch
/// on a non-finite objective.
MlpModel train(const MlpModel& model_init, const TrainingData& data, const TrainConfig& config,
               const std::optional<DriftSubspace>& subspace = std::nullopt, const EpochCallback& on_epoch = {});

}  // namespace driftguard
