#include "driftguard/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "driftguard/error.hpp"

namespace driftguard {

using nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::synthetic_sanity: return "synthetic_sanity";
    case ExperimentKind::directional_vs_isotropic: return "directional_vs_isotropic";
    case ExperimentKind::misspecification: return "misspecification";
    case ExperimentKind::air_quality: return "air_quality";
    case ExperimentKind::tetouan: return "tetouan";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::synthetic_sanity, ExperimentKind::directional_vs_isotropic,
                 ExperimentKind::misspecification, ExperimentKind::air_quality, ExperimentKind::tetouan})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment '" + s + "'");
}

bool is_synthetic(ExperimentKind k) {
  return k == ExperimentKind::synthetic_sanity || k == ExperimentKind::directional_vs_isotropic ||
         k == ExperimentKind::misspecification;
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  const std::vector<double> sweep{0.01, 0.03, 0.08};
  const std::vector<double> real_grid{3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 8e-2};
  if (is_synthetic(kind)) {
    for (std::uint64_t s = 0; s < 20; ++s) c.seeds.push_back(s);
    c.hidden = {32, 32};
    c.epochs = 200;
  } else {
    for (std::uint64_t s = 0; s < 10; ++s) c.seeds.push_back(s);
    c.hidden = {64, 64};
    c.epochs = 100;
  }
  switch (kind) {
    case ExperimentKind::synthetic_sanity:
      c.lambda_grid["dtr"] = {0.0, 0.01, 0.03, 0.08};
      break;
    case ExperimentKind::directional_vs_isotropic:
      c.lambda_grid["isotropic"] = sweep;
      c.lambda_grid["dtr"] = sweep;
      break;
    case ExperimentKind::misspecification:
      c.lambda_grid["dtr"] = sweep;
      c.angles_deg = {0.0, 20.0, 90.0};
      break;
    case ExperimentKind::air_quality:
      c.lambda_grid["isotropic"] = real_grid;
      c.lambda_grid["dtr"] = real_grid;
      c.lambda_grid["dtr_all"] = real_grid;
      break;
    case ExperimentKind::tetouan:
      c.lambda_grid["isotropic"] = real_grid;
      c.lambda_grid["dtr"] = real_grid;
      break;
  }
  return c;
}

namespace {

std::string angle_label(double deg) { return fmt::format("dtr_rot{}", deg); }

const std::vector<double>& grid_for(const ExperimentConfig& c, const std::string& key) {
  const auto it = c.lambda_grid.find(key);
  if (it == c.lambda_grid.end()) throw ConfigError("missing lambda_grid entry '" + key + "'");
  return it->second;
}

}  // namespace

std::vector<MethodSpec> ExperimentConfig::methods() const {
  std::vector<MethodSpec> out;
  switch (experiment) {
    case ExperimentKind::synthetic_sanity:
      out.push_back({"dtr", PenaltyKind::dtr, "true_axis", 0.0, grid_for(*this, "dtr")});
      break;
    case ExperimentKind::directional_vs_isotropic:
      out.push_back({"standard", PenaltyKind::none, "none", 0.0, {0.0}});
      out.push_back({"isotropic", PenaltyKind::isotropic, "identity", 0.0, grid_for(*this, "isotropic")});
      out.push_back({"dtr", PenaltyKind::dtr, "true_axis", 0.0, grid_for(*this, "dtr")});
      break;
    case ExperimentKind::misspecification:
      out.push_back({"standard", PenaltyKind::none, "none", 0.0, {0.0}});
      for (double a : angles_deg) out.push_back({angle_label(a), PenaltyKind::dtr, "rotated", a, grid_for(*this, "dtr")});
      break;
    case ExperimentKind::air_quality:
      out.push_back({"standard", PenaltyKind::none, "none", 0.0, {0.0}});
      out.push_back({"isotropic", PenaltyKind::isotropic, "identity", 0.0, grid_for(*this, "isotropic")});
      out.push_back({"dtr", PenaltyKind::dtr, "target_orthogonal", 0.0, grid_for(*this, "dtr")});
      out.push_back({"dtr_all", PenaltyKind::dtr, "diff_pca_all", 0.0, grid_for(*this, "dtr_all")});
      break;
    case ExperimentKind::tetouan:
      out.push_back({"standard", PenaltyKind::none, "none", 0.0, {0.0}});
      out.push_back({"isotropic", PenaltyKind::isotropic, "identity", 0.0, grid_for(*this, "isotropic")});
      out.push_back({"dtr", PenaltyKind::dtr, "diff_pca", 0.0, grid_for(*this, "dtr")});
      break;
  }
  return out;
}

LossKind ExperimentConfig::loss_kind() const { return is_synthetic(experiment) ? LossKind::bce_logit : LossKind::mse; }

TrainConfig ExperimentConfig::train_config(const MethodSpec& m, double lambda, std::uint64_t seed) const {
  TrainConfig t;
  t.lambda = lambda;
  t.penalty_kind = m.penalty;
  t.loss_kind = loss_kind();
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.adam_beta1 = adam_beta1;
  t.adam_beta2 = adam_beta2;
  t.adam_eps = adam_eps;
  t.seed = seed;
  return t;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  {
    auto sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("seeds must be distinct");
  }
  if (hidden.empty()) throw ConfigError("hidden must list at least one layer width");
  for (auto h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
  if (epochs <= 0 || batch_size <= 0) throw ConfigError("epochs and batch_size must be positive");
  if (!(learning_rate >= 0.0) || !(adam_eps > 0.0) || !(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("invalid optimizer settings");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (bootstrap_resamples == 0) throw ConfigError("bootstrap resamples must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  if (experiment == ExperimentKind::misspecification && angles_deg.empty())
    throw ConfigError("misspecification needs at least one angle");
  try {
    synthetic.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::string> names;
  for (const auto& m : methods()) {
    if (m.lambdas.empty()) throw ConfigError("lambda grid for '" + m.name + "' is empty");
    for (double l : m.lambdas)
      if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda values must be finite and nonnegative");
    auto sorted = m.lambdas;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("lambda grid for '" + m.name + "' has duplicates");
    if (std::find(names.begin(), names.end(), m.name) != names.end())
      throw ConfigError("duplicate method name '" + m.name + "'");
    names.push_back(m.name);
  }
  if (experiment == ExperimentKind::air_quality && air_quality_path.empty())
    throw ConfigError("air_quality experiment needs data.air_quality");
  if (experiment == ExperimentKind::tetouan && tetouan_path.empty())
    throw ConfigError("tetouan experiment needs data.tetouan");
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("experiment")) throw ConfigError("config needs an 'experiment' key");

  static const std::vector<std::string> known{"experiment", "seeds",    "num_seeds",  "lambda_grid", "angles_deg",
                                              "hidden",     "train",    "synthetic",  "data",        "bootstrap",
                                              "output_dir", "threads",  "save_models"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");

  try {
    ExperimentConfig c = ExperimentConfig::defaults(experiment_kind_from_string(j.at("experiment").get<std::string>()));
    if (j.contains("seeds") && j.contains("num_seeds")) throw ConfigError("give either seeds or num_seeds, not both");
    read_opt(j, "seeds", c.seeds);
    if (j.contains("num_seeds")) {
      const auto n = j.at("num_seeds").get<std::uint64_t>();
      c.seeds.clear();
      for (std::uint64_t s = 0; s < n; ++s) c.seeds.push_back(s);
    }
    if (j.contains("lambda_grid")) {
      for (const auto& [key, grid] : j.at("lambda_grid").items()) {
        if (!c.lambda_grid.contains(key)) throw ConfigError("lambda_grid key '" + key + "' does not apply to this experiment");
        c.lambda_grid[key] = grid.get<std::vector<double>>();
      }
    }
    read_opt(j, "angles_deg", c.angles_deg);
    read_opt(j, "hidden", c.hidden);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      read_opt(t, "epochs", c.epochs);
      read_opt(t, "batch_size", c.batch_size);
      read_opt(t, "learning_rate", c.learning_rate);
      read_opt(t, "adam_beta1", c.adam_beta1);
      read_opt(t, "adam_beta2", c.adam_beta2);
      read_opt(t, "adam_eps", c.adam_eps);
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      read_opt(s, "n_train", c.synthetic.n_train);
      read_opt(s, "n_val", c.synthetic.n_val);
      read_opt(s, "n_eval", c.synthetic.n_eval);
      read_opt(s, "grid_points", c.synthetic.grid_points);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read_opt(d, "air_quality", c.air_quality_path);
      read_opt(d, "tetouan", c.tetouan_path);
      read_opt(d, "enforce_reference_counts", c.enforce_reference_counts);
    }
    if (j.contains("bootstrap")) {
      read_opt(j.at("bootstrap"), "resamples", c.bootstrap_resamples);
      read_opt(j.at("bootstrap"), "seed", c.bootstrap_seed);
    }
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "threads", c.threads);
    read_opt(j, "save_models", c.save_models);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["seeds"] = c.seeds;
  j["lambda_grid"] = c.lambda_grid;
  if (c.experiment == ExperimentKind::misspecification) j["angles_deg"] = c.angles_deg;
  j["hidden"] = c.hidden;
  j["train"] = {{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps}};
  j["synthetic"] = {{"n_train", c.synthetic.n_train},
                    {"n_val", c.synthetic.n_val},
                    {"n_eval", c.synthetic.n_eval},
                    {"grid_points", c.synthetic.grid_points}};
  j["data"] = {{"air_quality", c.air_quality_path},
               {"tetouan", c.tetouan_path},
               {"enforce_reference_counts", c.enforce_reference_counts}};
  j["bootstrap"] = {{"resamples", c.bootstrap_resamples}, {"seed", c.bootstrap_seed}};
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["save_models"] = c.save_models;
  return j.dump(2) + "\n";
}

}  // namespace driftguard
