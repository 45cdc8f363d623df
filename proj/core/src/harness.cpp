#include "driftguard/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "driftguard/error.hpp"
#include "driftguard/objectives.hpp"
#include "driftguard/rng.hpp"

namespace driftguard {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTieTolerance = 1e-6;

Matrix broadcast(std::size_t rows, std::span<const double> v) {
  Matrix m(rows, v.size());
  for (std::size_t r = 0; r < rows; ++r) std::copy(v.begin(), v.end(), m.row(r).begin());
  return m;
}

/// Same network with the output mapped back to target units: f ↦ μ + σ·f.
MlpModel to_target_units(const MlpModel& model, double mean, double sd) {
  MlpModel out = model;
  for (double& w : out.weights.back().data()) w *= sd;
  for (double& b : out.biases.back()) b = b * sd + mean;
  return out;
}

double time_average(const Vector& times, const Vector& values) {
  double total = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) total += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
  return total / (times.back() - times.front());
}

}  // namespace

std::string CellKey::str() const { return fmt::format("{}_{}_{}", method, lambda, seed); }

bool operator<(const CellKey& a, const CellKey& b) {
  if (a.method != b.method) return a.method < b.method;
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  return a.seed < b.seed;
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::deploy_risk: return "deploy_risk";
    case Metric::volatility: return "volatility";
    case Metric::derivative_energy: return "derivative_energy";
    case Metric::directional_gain: return "directional_gain";
    case Metric::terminal_risk: return "terminal_risk";
  }
  return "unknown";
}

double metric_value(const CellResult& c, Metric m) {
  switch (m) {
    case Metric::deploy_risk: return c.deploy_risk;
    case Metric::volatility: return c.volatility;
    case Metric::derivative_energy: return c.derivative_energy;
    case Metric::directional_gain: return c.directional_gain;
    case Metric::terminal_risk: return c.terminal_risk;
  }
  return kNaN;
}

void CellResult::validate() const {
  const double values[] = {val_loss,      val_gain,         deploy_risk,    volatility,   derivative_energy,
                           directional_gain, terminal_risk, bounds.jv_energy, bounds.b_v, bounds.b_rho};
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError(fmt::format("cell {}: non-finite metric", key.str()));
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

ExperimentContext::ExperimentContext(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  if (is_synthetic(config_.experiment)) {
    eval_subspace_ = DriftSubspace::axis(2, 1);
    return;
  }
  const LoadOptions opts{config_.enforce_reference_counts};
  if (config_.experiment == ExperimentKind::air_quality)
    series_ = load_air_quality(config_.air_quality_path, opts);
  else
    series_ = load_tetouan(config_.tetouan_path, opts);
  prepare_real();
}

ExperimentContext::ExperimentContext(ExperimentConfig config, BlockedSeries series)
    : config_(std::move(config)), series_(std::move(series)) {
  config_.validate();
  if (is_synthetic(config_.experiment)) throw ConfigError("a loaded series needs a real-data experiment");
  prepare_real();
}

void ExperimentContext::prepare_real() {
  const BlockedSeries& s = *series_;
  s.validate();
  train_.x = s.features_for(BlockRole::train);
  train_.y = s.targets_for(BlockRole::train);
  val_.x = s.features_for(BlockRole::val);
  val_.y = s.targets_for(BlockRole::val);
  if (train_.y.empty() || val_.y.empty()) throw DataError(s.name + ": empty training or validation window");

  if (!s.target_standardized) {
    double m = 0.0;
    for (double y : train_.y) m += y;
    m /= static_cast<double>(train_.y.size());
    double v = 0.0;
    for (double y : train_.y) v += (y - m) * (y - m);
    const double sd = std::sqrt(v / static_cast<double>(train_.y.size()));
    if (!(sd > 0.0)) throw DataError(s.name + ": constant training target");
    target_mean_ = m;
    target_sd_ = sd;
    for (double& y : train_.y) y = (y - m) / sd;
    for (double& y : val_.y) y = (y - m) / sd;
  }

  const auto deploy = s.blocks_with_role(BlockRole::deploy);
  const auto val_blocks = s.blocks_with_role(BlockRole::val);
  if (deploy.size() < 3) throw DataError(s.name + ": need at least three deployment blocks");
  std::vector<Vector> means;
  Vector prev_mean = column_means(s.block_features(val_blocks.back()));
  double prev_time = s.block_midpoint(val_blocks.back());
  for (int b : deploy) {
    deploy_x_.push_back(s.block_features(b));
    deploy_y_.push_back(s.block_targets(b));
    const double t = s.block_midpoint(b);
    deploy_times_.push_back(t);
    Vector mu = column_means(deploy_x_.back());
    deploy_velocity_.push_back(scaled(subtract(mu, prev_mean), 1.0 / (t - prev_time)));
    prev_mean = mu;
    prev_time = t;
    means.push_back(std::move(mu));
  }

  std::vector<std::size_t> window(deploy.begin(), deploy.end());
  auto tag = [&](DriftSubspace v) {
    v.window_blocks = window;
    return v;
  };
  const Matrix shifts = consecutive_shifts(means);
  if (config_.experiment == ExperimentKind::air_quality) {
    const auto to = target_orthogonal_sensor_subspace(train_.x, train_.y, means, kAirQualitySensorColumns, 2);
    real_subspaces_["target_orthogonal"] = tag(to.subspace);
    real_subspaces_["diff_pca_all"] = tag(diff_cloud_pca(shifts, 2));
    eval_subspace_ = real_subspaces_.at("target_orthogonal");
  } else {
    real_subspaces_["diff_pca"] = tag(diff_cloud_pca(shifts, 1));
    eval_subspace_ = real_subspaces_.at("diff_pca");
  }
}

std::size_t ExperimentContext::input_dim() const { return series_ ? series_->dim() : 2; }

std::vector<std::size_t> ExperimentContext::layer_dims() const {
  std::vector<std::size_t> dims{input_dim()};
  dims.insert(dims.end(), config_.hidden.begin(), config_.hidden.end());
  dims.push_back(1);
  return dims;
}

std::optional<DriftSubspace> ExperimentContext::subspace_for(const MethodSpec& m) const {
  if (m.subspace == "none") return std::nullopt;
  if (m.subspace == "true_axis") return DriftSubspace::axis(2, 1);
  if (m.subspace == "identity") return DriftSubspace::full_identity(input_dim());
  if (m.subspace == "rotated") {
    const double alpha = m.angle_deg * std::numbers::pi / 180.0;
    DriftSubspace v = DriftSubspace::from_direction(rotated_direction(alpha), Provenance::rotated);
    v.rotation_angle = alpha;
    return v;
  }
  const auto it = real_subspaces_.find(m.subspace);
  if (it == real_subspaces_.end()) throw ConfigError("subspace '" + m.subspace + "' is not available here");
  return it->second;
}

std::map<std::string, DriftSubspace> ExperimentContext::subspaces() const {
  std::map<std::string, DriftSubspace> out;
  for (const auto& m : config_.methods())
    if (auto v = subspace_for(m)) out.emplace(m.name, *v);
  return out;
}

MlpModel ExperimentContext::initial_model(std::uint64_t seed) const {
  Rng rng = Rng::for_stream(seed, Stream::init);
  return MlpModel::glorot(layer_dims(), rng);
}

TrainingData ExperimentContext::training_data(std::uint64_t seed) const {
  if (series_) return train_;
  auto s = sample_synthetic(0.0, config_.synthetic.n_train, seed);
  return {std::move(s.x), std::move(s.y)};
}

CellResult ExperimentContext::run_cell(const MethodSpec& m, double lambda, std::uint64_t seed) const {
  const TrainConfig tc = config_.train_config(m, lambda, seed);
  MlpModel model = train(initial_model(seed), training_data(seed), tc, subspace_for(m));
  return evaluate(m, lambda, seed, std::move(model));
}

std::vector<Matrix> ExperimentContext::deployment_blocks(std::uint64_t seed) const {
  if (series_) return deploy_x_;
  Rng rng = Rng::for_stream(seed, Stream::evaluation);
  const auto base = sample_synthetic_base(config_.synthetic.n_eval, rng);
  std::vector<Matrix> out;
  for (double t : synthetic_time_grid(config_.synthetic.grid_points)) out.push_back(base.features_at(t));
  return out;
}

CellResult ExperimentContext::evaluate(const MethodSpec& m, double lambda, std::uint64_t seed, MlpModel model) const {
  CellResult c;
  c.key = {m.name, lambda, seed};
  const LossKind lk = config_.loss_kind();
  const DriftSubspace bound_subspace = subspace_for(m).value_or(eval_subspace_);

  if (!series_) {
    Rng vrng = Rng::for_stream(seed, Stream::validation);
    const auto vbase = sample_synthetic_base(config_.synthetic.n_val, vrng);
    const Matrix xv = vbase.features_at(0.0);
    c.val_loss = loss(lk, forward(model, xv), vbase.labels);
    c.val_gain = directional_penalty(model, xv, eval_subspace_);

    Rng erng = Rng::for_stream(seed, Stream::evaluation);
    const auto base = sample_synthetic_base(config_.synthetic.n_eval, erng);
    DeploymentPath path;
    path.times = synthetic_time_grid(config_.synthetic.grid_points);
    double gain = 0.0;
    for (double t : path.times) {
      path.samples.push_back(base.features_at(t));
      path.velocities.push_back(base.velocities_at(t));
      c.trajectory.values.push_back(loss(lk, forward(model, path.samples.back()), base.labels));
      gain += directional_penalty(model, path.samples.back(), eval_subspace_);
    }
    c.trajectory.times = path.times;
    c.directional_gain = gain / static_cast<double>(path.times.size());
    c.deploy_risk = time_average(c.trajectory.times, c.trajectory.values);
    c.bounds = evaluate_bounds(model, c.trajectory, path, bound_subspace, beta_for_loss(lk));
  } else {
    c.val_loss = loss(lk, forward(model, val_.x), val_.y);
    c.val_gain = directional_penalty(model, val_.x, eval_subspace_);

    const MlpModel unit_model = to_target_units(model, target_mean_, target_sd_);
    DeploymentPath path;
    path.times = deploy_times_;
    Vector all_scores, all_targets;
    for (std::size_t b = 0; b < deploy_x_.size(); ++b) {
      const Vector scores = forward(unit_model, deploy_x_[b]);
      c.trajectory.values.push_back(loss(lk, scores, deploy_y_[b]));
      all_scores.insert(all_scores.end(), scores.begin(), scores.end());
      all_targets.insert(all_targets.end(), deploy_y_[b].begin(), deploy_y_[b].end());
      path.samples.push_back(deploy_x_[b]);
      path.velocities.push_back(broadcast(deploy_x_[b].rows(), deploy_velocity_[b]));
    }
    c.trajectory.times = deploy_times_;
    c.deploy_risk = loss(lk, all_scores, all_targets);
    c.bounds = evaluate_bounds(unit_model, c.trajectory, path, bound_subspace, beta_for_loss(lk, all_scores, all_targets));

    c.hazard = hazard_trace(model, deploy_x_, 1);
    double gain = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < c.hazard->size(); ++i) {
      if (!c.hazard->valid[i]) continue;
      gain += c.hazard->g[i];
      ++valid;
    }
    c.directional_gain = valid > 0 ? gain / static_cast<double>(valid) : kNaN;
  }

  c.volatility = c.bounds.volatility;
  c.derivative_energy = c.bounds.derivative_energy;
  c.terminal_risk = c.trajectory.values.back();
  c.model = std::move(model);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Selection and aggregation
// ---------------------------------------------------------------------------

double select_lambda(const std::vector<LambdaScore>& scores) {
  if (scores.empty()) throw ValidationError("select_lambda: empty grid");
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& s : scores) {
    if (!std::isfinite(s.val_loss)) throw ValidationError(fmt::format("select_lambda: non-finite loss at λ={}", s.lambda));
    best_loss = std::min(best_loss, s.val_loss);
  }
  const LambdaScore* best = nullptr;
  for (const auto& s : scores) {
    if (std::abs(s.val_loss - best_loss) > kTieTolerance * std::max(std::abs(s.val_loss), std::abs(best_loss))) continue;
    if (!best || s.val_gain < best->val_gain || (s.val_gain == best->val_gain && s.lambda < best->lambda)) best = &s;
  }
  return best->lambda;
}

double select_lambda(const std::vector<CellResult>& cells, const std::string& method) {
  std::map<double, std::vector<const CellResult*>> by_lambda;
  for (const auto& c : cells)
    if (c.key.method == method) by_lambda[c.key.lambda].push_back(&c);
  if (by_lambda.empty()) throw ValidationError("select_lambda: no cells for method '" + method + "'");
  std::vector<LambdaScore> scores;
  const std::size_t n = by_lambda.begin()->second.size();
  for (const auto& [lambda, group] : by_lambda) {
    if (group.size() != n) throw ValidationError("select_lambda: unequal seed counts across the grid for " + method);
    double l = 0.0, g = 0.0;
    for (const auto* c : group) {
      l += c->val_loss;
      g += c->val_gain;
    }
    scores.push_back({lambda, l / static_cast<double>(n), g / static_cast<double>(n)});
  }
  return select_lambda(scores);
}

std::vector<const CellResult*> cells_for(const std::vector<CellResult>& cells, const std::string& method,
                                         std::optional<double> lambda) {
  std::vector<const CellResult*> out;
  for (const auto& c : cells)
    if (c.key.method == method && (!lambda || c.key.lambda == *lambda)) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](const CellResult* a, const CellResult* b) { return a->key < b->key; });
  return out;
}

MetricSummary summarize(const std::vector<CellResult>& cells, const std::string& method,
                        std::optional<double> lambda, bool nonzero_sweep) {
  std::vector<const CellResult*> group;
  for (const auto* c : cells_for(cells, method, lambda))
    if (!nonzero_sweep || c->key.lambda > 0.0) group.push_back(c);
  MetricSummary s;
  s.n = group.size();
  if (group.empty()) throw ValidationError("summarize: no cells for " + method);
  for (Metric m : kAllMetrics) {
    Vector xs;
    for (const auto* c : group) xs.push_back(metric_value(*c, m));
    s.mean[m] = mean(xs);
    s.sd[m] = sample_sd(xs);
  }
  return s;
}

MonitoringSummary monitoring_summary(const std::vector<const CellResult*>& cells) {
  std::vector<MovementPairs> drift, gain, product, roll2, roll3;
  for (const auto* c : cells) {
    if (!c->hazard) throw ValidationError("monitoring summary needs hazard traces");
    const auto& tr = *c->hazard;
    const std::size_t blocks = c->trajectory.values.size();
    Vector s2(blocks, kNaN), g(blocks, kNaN), h(blocks, kNaN), r2(blocks, kNaN), r3(blocks, kNaN);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const std::size_t b = tr.block_index[i];
      s2[b] = tr.s[i] * tr.s[i];
      g[b] = tr.g[i];
      h[b] = tr.h[i];
      r2[b] = tr.roll2_h[i];
      r3[b] = tr.roll3_h[i];
    }
    const auto& risks = c->trajectory.values;
    drift.push_back(risk_movement_pairs(s2, risks));
    gain.push_back(risk_movement_pairs(g, risks));
    product.push_back(risk_movement_pairs(h, risks));
    roll2.push_back(risk_movement_pairs(r2, risks));
    roll3.push_back(risk_movement_pairs(r3, risks));
  }
  auto pooled = [](const std::vector<MovementPairs>& p) {
    try {
      return pooled_spearman(p);
    } catch (const ValidationError&) {
      return kNaN;
    }
  };
  auto count = [](const std::vector<MovementPairs>& p) {
    std::size_t n = 0;
    for (const auto& x : p) n += x.score.size();
    return n;
  };
  MonitoringSummary out;
  out.drift = pooled(drift);
  out.gain = pooled(gain);
  out.product = pooled(product);
  out.roll2 = pooled(roll2);
  out.roll3 = pooled(roll3);
  out.pairs_product = count(product);
  out.pairs_roll3 = count(roll3);
  return out;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void rethrow_for_cell(std::exception_ptr err, const std::string& cell) {
  const std::string prefix = "cell " + cell + ": ";
  try {
    std::rethrow_exception(err);
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

struct Job {
  const MethodSpec* method;
  double lambda;
  std::uint64_t seed;
};

std::vector<PairedRow> paired_rows(const ExperimentConfig& cfg, const std::vector<CellResult>& cells,
                                   const std::map<std::string, double>& selected) {
  std::vector<PairedRow> out;
  auto compare = [&](const std::string& a, double la, const std::string& b, double lb) {
    const auto ca = cells_for(cells, a, la);
    const auto cb = cells_for(cells, b, lb);
    if (ca.empty() || ca.size() != cb.size()) return;
    const std::string label = fmt::format("{}@{} vs {}@{}", a, la, b, lb);
    for (Metric m : kAllMetrics) {
      Vector xa, xb;
      for (std::size_t i = 0; i < ca.size(); ++i) {
        xa.push_back(metric_value(*ca[i], m));
        xb.push_back(metric_value(*cb[i], m));
      }
      out.push_back({label, m, paired_comparison(xa, xb, cfg.bootstrap_resamples, cfg.bootstrap_seed)});
    }
  };
  const auto methods = cfg.methods();
  switch (cfg.experiment) {
    case ExperimentKind::synthetic_sanity:
      for (double l : methods[0].lambdas)
        if (l > 0.0) compare("dtr", l, "dtr", 0.0);
      break;
    case ExperimentKind::directional_vs_isotropic:
      for (double l : cfg.lambda_grid.at("dtr")) {
        compare("dtr", l, "standard", 0.0);
        compare("isotropic", l, "standard", 0.0);
        compare("dtr", l, "isotropic", l);
      }
      break;
    case ExperimentKind::misspecification:
      for (double l : cfg.lambda_grid.at("dtr"))
        for (std::size_t i = 1; i < methods.size(); ++i) {
          compare(methods[i].name, l, "standard", 0.0);
          if (i > 1) compare(methods[i].name, l, methods[1].name, l);
        }
      break;
    case ExperimentKind::air_quality:
    case ExperimentKind::tetouan:
      compare("dtr", selected.at("dtr"), "standard", 0.0);
      compare("dtr", selected.at("dtr"), "isotropic", selected.at("isotropic"));
      compare("isotropic", selected.at("isotropic"), "standard", 0.0);
      if (selected.contains("dtr_all")) compare("dtr_all", selected.at("dtr_all"), "standard", 0.0);
      break;
  }
  return out;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config) { return run_experiment(ExperimentContext(config)); }

RunSummary run_experiment(const ExperimentContext& ctx) {
  const ExperimentConfig& cfg = ctx.config();
  const auto methods = cfg.methods();
  std::vector<Job> jobs;
  for (const auto& m : methods)
    for (double l : m.lambdas)
      for (auto s : cfg.seeds) jobs.push_back({&m, l, s});

  std::vector<std::optional<CellResult>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size() || failed.load()) return;
      try {
        results[i] = ctx.run_cell(*jobs[i].method, jobs[i].lambda, jobs[i].seed);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(cfg.threads, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (errors[i]) rethrow_for_cell(errors[i], CellKey{jobs[i].method->name, jobs[i].lambda, jobs[i].seed}.str());

  RunSummary run;
  run.config = cfg;
  for (auto& r : results) run.cells.push_back(std::move(*r));
  std::sort(run.cells.begin(), run.cells.end(), [](const CellResult& a, const CellResult& b) { return a.key < b.key; });
  for (const auto& m : methods) run.selected_lambda[m.name] = select_lambda(run.cells, m.name);
  run.paired = paired_rows(cfg, run.cells, run.selected_lambda);
  if (!is_synthetic(cfg.experiment)) run.monitoring = monitoring_summary(cells_for(run.cells, "dtr", run.selected_lambda.at("dtr")));
  run.subspaces = ctx.subspaces();
  if (ctx.series()) {
    run.dataset_sha256 = ctx.series()->source_sha256;
    run.series = ctx.series();
  }
  return run;
}

}  // namespace driftguard
