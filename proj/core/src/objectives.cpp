#include "driftguard/objectives.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "driftguard/error.hpp"
#include "driftguard/rng.hpp"

namespace driftguard {

std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::isotropic: return "isotropic";
    case PenaltyKind::dtr: return "dtr";
  }
  return "unknown";
}

std::string to_string(LossKind k) { return k == LossKind::bce_logit ? "bce_logit" : "mse"; }

PenaltyKind penalty_kind_from_string(const std::string& s) {
  if (s == "none") return PenaltyKind::none;
  if (s == "isotropic") return PenaltyKind::isotropic;
  if (s == "dtr") return PenaltyKind::dtr;
  throw ValidationError("unknown penalty kind: " + s);
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "bce_logit") return LossKind::bce_logit;
  if (s == "mse") return LossKind::mse;
  throw ValidationError("unknown loss kind: " + s);
}

void TrainConfig::validate(bool has_subspace) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError(fmt::format("lambda must be >= 0 (got {})", lambda));
  if (epochs <= 0 || batch_size <= 0) throw ValidationError("epochs and batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
  if (penalty_kind == PenaltyKind::dtr && !has_subspace) throw ValidationError("dtr penalty requires a drift subspace");
}

namespace {

void check_loss_inputs(LossKind kind, std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size()) throw ShapeError("scores/targets length mismatch");
  if (scores.empty()) throw ValidationError("loss over an empty batch");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i]) || std::isnan(targets[i])) throw ValidationError("NaN in loss input");
    if (kind == LossKind::bce_logit && targets[i] != 0.0 && targets[i] != 1.0)
      throw ValidationError("bce_logit targets must be 0 or 1");
  }
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

double loss(LossKind kind, std::span<const double> scores, std::span<const double> targets) {
  check_loss_inputs(kind, scores, targets);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i], y = targets[i];
    if (kind == LossKind::bce_logit)
      total += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
    else
      total += (s - y) * (s - y);
  }
  return total / static_cast<double>(scores.size());
}

Vector loss_score_gradient(LossKind kind, std::span<const double> scores, std::span<const double> targets) {
  check_loss_inputs(kind, scores, targets);
  const double inv_n = 1.0 / static_cast<double>(scores.size());
  Vector g(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    g[i] = inv_n * (kind == LossKind::bce_logit ? sigmoid(scores[i]) - targets[i] : 2.0 * (scores[i] - targets[i]));
  return g;
}

GradBundle loss_objective(const MlpModel& model, const Matrix& x, std::span<const double> y, LossKind kind) {
  const auto trace = forward_trace(model, x);
  GradBundle g = backprop(model, trace, loss_score_gradient(kind, trace.scores(), y));
  g.value = loss(kind, trace.scores(), y);
  return g;
}

GradBundle dtr_objective(const MlpModel& model, const Matrix& x, std::span<const double> y, const DriftSubspace& v,
                         double lambda, LossKind kind) {
  if (!(lambda >= 0.0)) throw ValidationError(fmt::format("lambda must be >= 0 (got {})", lambda));
  GradBundle g = loss_objective(model, x, y, kind);
  if (lambda > 0.0) g.add_scaled(penalty_param_gradient(model, x, v), lambda);
  else v.validate();
  return g;
}

GradBundle isotropic_objective(const MlpModel& model, const Matrix& x, std::span<const double> y, double lambda,
                               LossKind kind) {
  return dtr_objective(model, x, y, DriftSubspace::full_identity(model.input_dim()), lambda, kind);
}

AdamOptimizer::AdamOptimizer(const MlpModel& model, double lr, double beta1, double beta2, double eps)
    : m_(GradBundle::zeros_like(model)), v_(GradBundle::zeros_like(model)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {}

void AdamOptimizer::step(MlpModel& model, const GradBundle& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](std::span<double> param, std::span<const double> g, std::span<double> m, std::span<double> v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      param[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    update(model.weights[l].data(), grad.d_weights[l].data(), m_.d_weights[l].data(), v_.d_weights[l].data());
    update(model.biases[l], grad.d_biases[l], m_.d_biases[l], v_.d_biases[l]);
  }
}

MlpModel train(const MlpModel& model_init, const TrainingData& data, const TrainConfig& config,
               const std::optional<DriftSubspace>& subspace, const EpochCallback& on_epoch) {
  config.validate(subspace.has_value());
  model_init.validate();
  if (data.x.rows() == 0) throw ValidationError("training data is empty");
  if (data.x.rows() != data.y.size()) throw ShapeError("training x/y row mismatch");
  if (subspace) subspace->validate();

  MlpModel model = model_init;
  AdamOptimizer adam(model, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
  Rng shuffle_rng = Rng::for_stream(config.seed, Stream::shuffle);
  const std::size_t n = data.x.rows();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const DriftSubspace identity = DriftSubspace::full_identity(model.input_dim());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    double epoch_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = select_rows(data.x, idx);
      Vector yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.y[idx[i]];

      GradBundle g;
      switch (config.penalty_kind) {
        case PenaltyKind::none: g = loss_objective(model, xb, yb, config.loss_kind); break;
        case PenaltyKind::isotropic: g = dtr_objective(model, xb, yb, identity, config.lambda, config.loss_kind); break;
        case PenaltyKind::dtr: g = dtr_objective(model, xb, yb, *subspace, config.lambda, config.loss_kind); break;
      }
      if (!g.all_finite()) throw NumericalError(fmt::format("non-finite objective at epoch {}", epoch));
      adam.step(model, g);
      epoch_total += g.value;
      ++batches;
    }
    if (on_epoch) on_epoch(epoch, epoch_total / static_cast<double>(batches));
  }
  model.validate();
  return model;
}

}  // namespace driftguard
