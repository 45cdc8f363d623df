// driftguard command-line front end.
//
//   driftguard run --config <file>
//   driftguard verify-bounds --run <dir>
//   driftguard monitor --run <dir> --model <ckpt> [--seed N] [--out file]
//   driftguard fetch-data --dataset <air_quality|tetouan> --out <dir> [--download]
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>

#include "driftguard/config.hpp"
#include "driftguard/datasets.hpp"
#include "driftguard/error.hpp"
#include "driftguard/harness.hpp"
#include "driftguard/monitoring.hpp"

namespace {

using namespace driftguard;

constexpr int kOk = 0;
constexpr int kConfigExit = 1;
constexpr int kDataExit = 2;
constexpr int kNumericalExit = 3;

struct RemoteDataset {
  const char* host;
  const char* path;
  const char* file_in_archive;
  SplitCounts counts;
};

const RemoteDataset* remote_for(const std::string& name) {
  static const RemoteDataset aq{"archive.ics.uci.edu", "/static/public/360/air+quality.zip", "AirQualityUCI.csv",
                                kAirQualityCounts};
  static const RemoteDataset tet{"archive.ics.uci.edu", "/static/public/849/power+consumption+of+tetouan+city.zip",
                                 "Tetuan City power consumption.csv", kTetouanCounts};
  if (name == "air_quality") return &aq;
  if (name == "tetouan") return &tet;
  return nullptr;
}

int cmd_run(const std::string& config_path, const std::string& out_override, std::size_t threads) {
  ExperimentConfig cfg = load_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (threads > 0) cfg.threads = threads;
  cfg.validate();
  const RunSummary run = run_experiment(cfg);
  const std::string dir = write_run(run, cfg.output_dir);
  fmt::print("{}: {} cells written to {}\n", to_string(cfg.experiment), run.cells.size(), dir);
  for (const auto& [method, lambda] : run.selected_lambda) fmt::print("  selected λ for {}: {}\n", method, lambda);
  if (run.monitoring)
    fmt::print("  roll-3 hazard Spearman vs next-block risk change: {:.3f}\n", run.monitoring->roll3);
  return kOk;
}

int cmd_verify(const std::string& dir) {
  const VerifyResult r = verify_run(dir);
  for (const auto& msg : r.messages) fmt::print("  {}\n", msg);
  fmt::print("checked {} models: poincare failures {}, jacobian-velocity failures {}, low-rank failures {}\n", r.checked,
             r.poincare_failures, r.jv_failures, r.lowrank_failures);
  fmt::print("max relative mismatch vs saved reports: {:.3g}\n", r.max_relative_mismatch);
  if (r.max_relative_mismatch > 1e-9 || r.poincare_failures > 0) return kNumericalExit;
  return kOk;
}

int cmd_monitor(const std::string& dir, const std::string& ckpt, std::uint64_t seed, const std::string& out) {
  const ExperimentContext ctx = load_run_context(dir);
  const MlpModel model = load_checkpoint(ckpt);
  const HazardTrace trace = hazard_trace(model, ctx.deployment_blocks(seed), 1);
  if (out.empty())
    std::cout << hazard_csv(trace);
  else
    write_hazard_csv(trace, out);
  return kOk;
}

int cmd_fetch(const std::string& name, const std::string& out_dir, bool download) {
  const RemoteDataset* ds = remote_for(name);
  if (!ds) throw ConfigError("unknown dataset '" + name + "' (expected air_quality or tetouan)");
  fmt::print("dataset:   {}\n", name);
  fmt::print("url:       https://{}{}\n", ds->host, ds->path);
  fmt::print("file:      {} (inside the archive)\n", ds->file_in_archive);
  fmt::print("expected:  {} train / {} val / {} deploy rows, {} deployment blocks after cleaning\n", ds->counts.train,
             ds->counts.val, ds->counts.deploy, ds->counts.deploy_blocks);
  fmt::print("checksum:  the SHA-256 of the extracted CSV is recorded in each run's metadata.json\n");
  if (!download) return kOk;

  std::filesystem::create_directories(out_dir);
  httplib::SSLClient client(ds->host);
  client.set_follow_location(true);
  const auto res = client.Get(ds->path);
  if (!res || res->status != 200)
    throw DataError(fmt::format("download failed ({})", res ? std::to_string(res->status) : httplib::to_string(res.error())));
  const auto archive = std::filesystem::path(out_dir) / std::filesystem::path(ds->path).filename();
  std::ofstream(archive, std::ios::binary) << res->body;
  fmt::print("saved:     {} (sha256 {})\n", archive.string(), sha256_hex(res->body));
  fmt::print("extract {} from the archive and point the config's data section at it\n", ds->file_in_archive);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftguard: drift-aligned tangent regularization and deployment-risk diagnostics"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::size_t threads = 0;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--output-dir", out_override, "Override the config's output_dir");
  run->add_option("--threads", threads, "Override the worker count");

  std::string run_dir;
  auto* verify = app.add_subcommand("verify-bounds", "Recompute and check every bound report in a run directory");
  verify->add_option("--run", run_dir, "Run directory")->required();

  std::string model_path, monitor_out;
  std::uint64_t seed = 0;
  auto* monitor = app.add_subcommand("monitor", "Hazard trace of a checkpoint over the run's deployment blocks");
  monitor->add_option("--run", run_dir, "Run directory")->required();
  monitor->add_option("--model", model_path, "Model checkpoint")->required();
  monitor->add_option("--seed", seed, "Seed of the synthetic evaluation path");
  monitor->add_option("--out", monitor_out, "Write the CSV here instead of stdout");

  std::string dataset, fetch_out;
  bool download = false;
  auto* fetch = app.add_subcommand("fetch-data", "Show where to get a dataset, optionally download it");
  fetch->add_option("--dataset", dataset, "air_quality or tetouan")->required();
  fetch->add_option("--out", fetch_out, "Directory for the downloaded archive")->required();
  fetch->add_flag("--download", download, "Download the archive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigExit;
  }

  try {
    if (*run) return cmd_run(config_path, out_override, threads);
    if (*verify) return cmd_verify(run_dir);
    if (*monitor) return cmd_monitor(run_dir, model_path, seed, monitor_out);
    if (*fetch) return cmd_fetch(dataset, fetch_out, download);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataExit;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalExit;
  } catch (const RankError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigExit;
  }
  return kOk;
}
