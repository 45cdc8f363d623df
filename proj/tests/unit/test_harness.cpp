#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "driftguard/config.hpp"
#include "driftguard/error.hpp"
#include "driftguard/harness.hpp"
#include "fixtures.hpp"

using namespace driftguard;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(ExperimentKind kind) {
  ExperimentConfig c = ExperimentConfig::defaults(kind);
  c.seeds = {0};
  c.hidden = {4};
  c.epochs = 1;
  c.synthetic.n_train = 128;
  c.synthetic.n_val = 64;
  c.synthetic.n_eval = 32;
  c.synthetic.grid_points = 11;
  c.bootstrap_resamples = 200;
  return c;
}

std::size_t line_count(const fs::path& p) {
  const std::string text = fixtures::slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DRIFTGUARD_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(SelectLambda, MinimumValidationLoss) {
  EXPECT_EQ(select_lambda({{0.01, 0.5, 1.0}, {0.03, 0.4, 1.0}, {0.08, 0.6, 1.0}}), 0.03);
}

TEST(SelectLambda, TiesGoToSmallerGainThenSmallerLambda) {
  EXPECT_EQ(select_lambda({{0.01, 0.4, 2.0}, {0.03, 0.4 * (1 + 1e-8), 1.0}}), 0.03);
  EXPECT_EQ(select_lambda({{0.03, 0.4, 1.0}, {0.01, 0.4, 1.0}}), 0.01);
  EXPECT_EQ(select_lambda({{0.01, 0.4, 1.0}, {0.03, 0.4 * (1 + 1e-4), 0.0}}), 0.01);
}

TEST(SelectLambda, PermutationInvariant) {
  std::vector<LambdaScore> s{{0.001, 0.31, 2.0}, {0.003, 0.30, 5.0}, {0.01, 0.30, 4.0}, {0.03, 0.35, 0.1}};
  const double ref = select_lambda(s);
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  do {
    EXPECT_EQ(select_lambda(s), ref);
  } while (std::next_permutation(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; }));
  EXPECT_EQ(ref, 0.01);
  EXPECT_THROW(select_lambda(std::vector<LambdaScore>{}), ValidationError);
}

TEST(Config, DefaultsAndMethods) {
  const auto d = ExperimentConfig::defaults(ExperimentKind::directional_vs_isotropic);
  EXPECT_EQ(d.seeds.size(), 20u);
  std::vector<std::string> names;
  for (const auto& m : d.methods()) names.push_back(m.name);
  EXPECT_EQ(names, (std::vector<std::string>{"standard", "isotropic", "dtr"}));
  const auto t = ExperimentConfig::defaults(ExperimentKind::tetouan);
  EXPECT_EQ(t.seeds.size(), 10u);
  EXPECT_EQ(t.loss_kind(), LossKind::mse);
  EXPECT_EQ(d.loss_kind(), LossKind::bce_logit);
  const auto m = ExperimentConfig::defaults(ExperimentKind::misspecification);
  names.clear();
  for (const auto& s : m.methods()) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"standard", "dtr_rot0", "dtr_rot20", "dtr_rot90"}));
}

TEST(Config, ParseOverridesAndRoundTrip) {
  const auto c = parse_config(R"({"experiment": "synthetic_sanity", "num_seeds": 3, "hidden": [8],
                                  "train": {"epochs": 5, "learning_rate": 0.01},
                                  "lambda_grid": {"dtr": [0, 0.5]}, "output_dir": "x"})");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{8}));
  EXPECT_EQ(c.epochs, 5);
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.lambda_grid.at("dtr"), (std::vector<double>{0, 0.5}));
  EXPECT_EQ(config_json(parse_config(config_json(c))), config_json(c));
}

TEST(Config, ParseErrors) {
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config("[]"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seeds": [0]})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "nope"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "tetouan", "colour": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "synthetic_sanity", "seeds": []})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "synthetic_sanity", "lambda_grid": {"dtr": [-1]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "synthetic_sanity", "lambda_grid": {"isotropic": [1]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "tetouan"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "synthetic_sanity", "seeds": [1, 1]})"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Harness, CellKeyOrderingAndNames) {
  const CellKey a{"dtr", 0.03, 2}, b{"dtr", 0.03, 10}, c{"dtr", 0.1, 0};
  EXPECT_TRUE(a < b);
  EXPECT_TRUE(b < c);
  EXPECT_EQ(a.str(), "dtr_0.03_2");
}

TEST(Harness, MinimalSanityRun) {
  auto c = tiny(ExperimentKind::synthetic_sanity);
  c.lambda_grid["dtr"] = {0.0};
  const RunSummary run = run_experiment(c);
  ASSERT_EQ(run.cells.size(), 1u);
  const auto& cell = run.cells[0];
  EXPECT_EQ(cell.key, (CellKey{"dtr", 0.0, 0}));
  EXPECT_EQ(cell.trajectory.times.size(), 11u);
  EXPECT_TRUE(cell.bounds.holds_poincare);
  EXPECT_EQ(cell.bounds.beta, 1.0);
  EXPECT_NO_THROW(cell.validate());

  const auto dir = fixtures::temp_dir("sanity_run");
  write_run(run, dir.string());
  EXPECT_EQ(line_count(dir / "scatter.csv"), 2u);  // header + one point
  EXPECT_EQ(line_count(dir / "cells.csv"), 2u);
  EXPECT_TRUE(fs::exists(dir / "bounds" / (cell.key.str() + ".json")));
  EXPECT_TRUE(fs::exists(dir / "models" / (cell.key.str() + ".ckpt")));
  EXPECT_TRUE(fs::exists(dir / "metadata.json"));
  EXPECT_TRUE(fs::exists(dir / "plot_figures.py"));

  const VerifyResult v = verify_run(dir.string());
  EXPECT_EQ(v.checked, 1u);
  EXPECT_EQ(v.poincare_failures, 0u);
  EXPECT_EQ(v.max_relative_mismatch, 0.0);
}

TEST(Harness, MatchedSeedsGiveIdenticalUnpenalizedModels) {
  auto c = tiny(ExperimentKind::directional_vs_isotropic);
  c.epochs = 2;
  c.lambda_grid["dtr"] = {0.0, 0.03};
  c.lambda_grid["isotropic"] = {0.0};
  const RunSummary run = run_experiment(c);
  const auto std_cells = cells_for(run.cells, "standard");
  const auto iso0 = cells_for(run.cells, "isotropic", 0.0);
  const auto dtr0 = cells_for(run.cells, "dtr", 0.0);
  const auto dtr3 = cells_for(run.cells, "dtr", 0.03);
  ASSERT_EQ(std_cells.size(), 1u);
  ASSERT_EQ(iso0.size(), 1u);
  ASSERT_EQ(dtr0.size(), 1u);
  EXPECT_EQ(std_cells[0]->model, iso0[0]->model);
  EXPECT_EQ(std_cells[0]->model, dtr0[0]->model);
  EXPECT_NE(std_cells[0]->model, dtr3[0]->model);
  EXPECT_EQ(std_cells[0]->deploy_risk, dtr0[0]->deploy_risk);
}

TEST(Harness, RunsAreByteIdentical) {
  auto c = tiny(ExperimentKind::directional_vs_isotropic);
  c.seeds = {0, 1};
  c.lambda_grid["dtr"] = {0.03};
  c.lambda_grid["isotropic"] = {0.03};
  const auto a = fixtures::temp_dir("det_a"), b = fixtures::temp_dir("det_b");
  c.threads = 1;
  write_run(run_experiment(c), a.string());
  c.threads = 2;
  write_run(run_experiment(c), b.string());
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "config.json") continue;  // records the thread count
    const auto rel = fs::relative(entry.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(fixtures::slurp(entry.path()), fixtures::slurp(b / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 10u);
}

TEST(Harness, SummariesAndSelection) {
  auto c = tiny(ExperimentKind::synthetic_sanity);
  c.seeds = {0, 1};
  c.lambda_grid["dtr"] = {0.0, 0.08};
  const RunSummary run = run_experiment(c);
  ASSERT_EQ(run.cells.size(), 4u);
  const auto s = summarize(run.cells, "dtr", 0.08);
  EXPECT_EQ(s.n, 2u);
  const auto cells = cells_for(run.cells, "dtr", 0.08);
  EXPECT_DOUBLE_EQ(s.mean.at(Metric::volatility), (cells[0]->volatility + cells[1]->volatility) / 2);
  const auto sweep = summarize(run.cells, "dtr", std::nullopt, true);
  EXPECT_EQ(sweep.n, 2u);
  const double chosen = select_lambda(run.cells, "dtr");
  EXPECT_TRUE(chosen == 0.0 || chosen == 0.08);
  EXPECT_FALSE(run.paired.empty());
  for (const auto& row : run.paired) EXPECT_EQ(row.result.n, 2u);
}

TEST(Harness, RealDataPipelineOnFixture) {
  const auto dir = fixtures::temp_dir("tet_run");
  const auto csv = dir / "tetouan.csv";
  fixtures::write_tetouan(csv);
  auto c = tiny(ExperimentKind::tetouan);
  c.tetouan_path = csv.string();
  c.lambda_grid["dtr"] = {1e-3};
  c.lambda_grid["isotropic"] = {1e-3};
  c.seeds = {0, 1, 2};
  const RunSummary run = run_experiment(c);
  ASSERT_EQ(run.cells.size(), 9u);
  ASSERT_TRUE(run.monitoring.has_value());
  for (const auto& cell : run.cells) {
    ASSERT_TRUE(cell.hazard.has_value());
    EXPECT_EQ(cell.trajectory.values.size(), 6u);
    EXPECT_TRUE(cell.bounds.beta_empirical);
    EXPECT_TRUE(cell.bounds.holds_poincare);
  }
  EXPECT_EQ(run.selected_lambda.at("dtr"), 1e-3);
  const auto out = dir / "run";
  write_run(run, out.string());
  EXPECT_TRUE(fs::exists(out / "monitoring.csv"));
  EXPECT_TRUE(fs::exists(out / "data" / "dataset.cache"));
  const VerifyResult v = verify_run(out.string());
  EXPECT_EQ(v.checked, 9u);
  EXPECT_LE(v.max_relative_mismatch, 1e-9);
}

TEST(Cli, ExitCodes) {
  const auto dir = fixtures::temp_dir("cli");
  const auto log = dir / "log.txt";

  EXPECT_EQ(run_cli("", log), 1);
  EXPECT_EQ(run_cli("fetch-data --dataset air_quality --out " + dir.string(), log), 0);
  EXPECT_NE(fixtures::slurp(log).find("https://archive.ics.uci.edu/static/public/360/air+quality.zip"), std::string::npos);
  EXPECT_EQ(run_cli("fetch-data --dataset nope --out " + dir.string(), log), 1);

  {
    std::ofstream(dir / "bad.json") << "{\"experiment\": \"synthetic_sanity\", \"oops\": 1}";
    std::ofstream(dir / "nodata.json") << "{\"experiment\": \"tetouan\", \"data\": {\"tetouan\": \"" << (dir / "absent.csv").string()
                                       << "\"}}";
    std::ofstream(dir / "ok.json") << "{\"experiment\": \"synthetic_sanity\", \"seeds\": [0], \"hidden\": [4],"
                                      " \"lambda_grid\": {\"dtr\": [0]}, \"train\": {\"epochs\": 1},"
                                      " \"synthetic\": {\"n_train\": 64, \"n_val\": 32, \"n_eval\": 16, \"grid_points\": 5},"
                                      " \"output_dir\": \"" << (dir / "run").string() << "\"}";
  }
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string(), log), 1);
  EXPECT_EQ(run_cli("run --config " + (dir / "nodata.json").string(), log), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string(), log), 0) << fixtures::slurp(log);
  EXPECT_EQ(run_cli("verify-bounds --run " + (dir / "run").string(), log), 0) << fixtures::slurp(log);
  const auto model = dir / "run" / "models" / "dtr_0_0.ckpt";
  EXPECT_EQ(run_cli("monitor --run " + (dir / "run").string() + " --model " + model.string(), log), 0) << fixtures::slurp(log);
  EXPECT_EQ(fixtures::slurp(log).rfind("block_index,s,g,h,roll2_h,roll3_h,valid", 0), 0u);
}
