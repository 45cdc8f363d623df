#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "driftguard/error.hpp"
#include "driftguard/harness.hpp"

namespace driftguard {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double x) { return std::isnan(x) ? "nan" : fmt::format("{}", x); }

std::string metrics_header(const std::string& suffix) {
  std::string out;
  for (Metric m : kAllMetrics) out += "," + to_string(m) + suffix;
  return out;
}

std::string cells_csv(const RunSummary& run) {
  std::string out =
      "method,lambda,seed,val_loss,val_gain,deploy_risk,volatility,derivative_energy,directional_gain,terminal_risk,"
      "poincare_rhs,jv_energy,jv_rhs,b_v,b_rho,lowrank_rhs,beta,holds_poincare,holds_jv,holds_lowrank\n";
  for (const auto& c : run.cells) {
    const auto& b = c.bounds;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.key.method, num(c.key.lambda),
                       c.key.seed, num(c.val_loss), num(c.val_gain), num(c.deploy_risk), num(c.volatility),
                       num(c.derivative_energy), num(c.directional_gain), num(c.terminal_risk), num(b.poincare_rhs),
                       num(b.jv_energy), num(b.jv_rhs), num(b.b_v), num(b.b_rho), num(b.lowrank_rhs), num(b.beta),
                       int(b.holds_poincare), int(b.holds_jv), int(b.holds_lowrank));
  }
  return out;
}

std::string selection_csv(const RunSummary& run) {
  std::string out = "method,lambda,mean_val_loss,mean_val_gain,selected\n";
  for (const auto& m : run.config.methods()) {
    for (double l : m.lambdas) {
      double loss = 0.0, gain = 0.0;
      const auto group = cells_for(run.cells, m.name, l);
      for (const auto* c : group) {
        loss += c->val_loss;
        gain += c->val_gain;
      }
      const double n = static_cast<double>(group.size());
      out += fmt::format("{},{},{},{},{}\n", m.name, num(l), num(loss / n), num(gain / n),
                         int(run.selected_lambda.at(m.name) == l));
    }
  }
  return out;
}

std::string summary_row(const std::string& method, const std::string& label, const MetricSummary& s) {
  std::string out = fmt::format("{},{},{}", method, label, s.n);
  for (Metric m : kAllMetrics) out += "," + num(s.mean.at(m));
  for (Metric m : kAllMetrics) out += "," + num(s.sd.at(m));
  return out + "\n";
}

std::string summary_csv(const RunSummary& run) {
  std::string out = "method,lambda,n" + metrics_header("_mean") + metrics_header("_sd") + "\n";
  const bool synthetic = is_synthetic(run.config.experiment);
  for (const auto& m : run.config.methods()) {
    for (double l : m.lambdas) out += summary_row(m.name, num(l), summarize(run.cells, m.name, l));
    const bool has_nonzero = std::any_of(m.lambdas.begin(), m.lambdas.end(), [](double l) { return l > 0.0; });
    if (synthetic && has_nonzero) out += summary_row(m.name, "sweep", summarize(run.cells, m.name, std::nullopt, true));
    if (!synthetic)
      out += summary_row(m.name, "selected", summarize(run.cells, m.name, run.selected_lambda.at(m.name)));
  }
  return out;
}

std::string paired_csv(const RunSummary& run) {
  std::string out = "comparison,metric,n,wins,mean_diff,ci_low,ci_high\n";
  for (const auto& p : run.paired)
    out += fmt::format("{},{},{},{},{},{},{}\n", p.label, to_string(p.metric), p.result.n, p.result.wins,
                       num(p.result.mean_diff), num(p.result.ci_low), num(p.result.ci_high));
  return out;
}

std::string ratios_csv(const RunSummary& run) {
  std::string out = "panel,method,metric,ratio\n";
  auto emit = [&](const std::string& panel, const std::string& method, const MetricSummary& num_s,
                  const MetricSummary& den_s) {
    for (Metric m : kAllMetrics)
      out += fmt::format("{},{},{},{}\n", panel, method, to_string(m), num(num_s.mean.at(m) / den_s.mean.at(m)));
  };
  const auto& cells = run.cells;
  const auto methods = run.config.methods();
  switch (run.config.experiment) {
    case ExperimentKind::synthetic_sanity: {
      const auto& grid = methods[0].lambdas;
      if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) break;
      const auto base = summarize(cells, "dtr", 0.0);
      for (double l : grid)
        if (l > 0.0) emit(fmt::format("lambda_{}_vs_lambda_0", l), "dtr", summarize(cells, "dtr", l), base);
      break;
    }
    case ExperimentKind::directional_vs_isotropic: {
      const auto base = summarize(cells, "standard", 0.0);
      for (double l : run.config.lambda_grid.at("dtr")) {
        const auto& iso = run.config.lambda_grid.at("isotropic");
        if (std::find(iso.begin(), iso.end(), l) == iso.end()) continue;
        emit(fmt::format("lambda_{}_vs_standard", l), "isotropic", summarize(cells, "isotropic", l), base);
        emit(fmt::format("lambda_{}_vs_standard", l), "dtr", summarize(cells, "dtr", l), base);
      }
      emit("sweep_vs_standard", "isotropic", summarize(cells, "isotropic", std::nullopt, true), base);
      emit("sweep_vs_standard", "dtr", summarize(cells, "dtr", std::nullopt, true), base);
      break;
    }
    case ExperimentKind::misspecification: {
      const auto aligned = summarize(cells, methods[1].name, std::nullopt, true);
      for (const auto& m : methods) {
        const bool sweep = m.name != "standard";
        emit("sweep_vs_" + methods[1].name, m.name, summarize(cells, m.name, std::nullopt, sweep), aligned);
      }
      for (double l : run.config.lambda_grid.at("dtr")) {
        const auto base = summarize(cells, methods[1].name, l);
        for (std::size_t i = 1; i < methods.size(); ++i)
          emit(fmt::format("lambda_{}_vs_{}", l, methods[1].name), methods[i].name, summarize(cells, methods[i].name, l),
               base);
      }
      break;
    }
    case ExperimentKind::air_quality:
    case ExperimentKind::tetouan: {
      const auto base = summarize(cells, "standard", 0.0);
      for (const auto& m : methods)
        emit("selected_vs_standard", m.name, summarize(cells, m.name, run.selected_lambda.at(m.name)), base);
      break;
    }
  }
  return out;
}

std::string scatter_csv(const RunSummary& run) {
  std::string out = "method,lambda,seed,poincare_rhs,volatility,jv_rhs\n";
  for (const auto& c : run.cells)
    out += fmt::format("{},{},{},{},{},{}\n", c.key.method, num(c.key.lambda), c.key.seed, num(c.bounds.poincare_rhs),
                       num(c.volatility), num(c.bounds.jv_rhs));
  return out;
}

std::string risk_curves_csv(const RunSummary& run) {
  std::string out = "method,lambda,seed,selected,time,risk\n";
  for (const auto& c : run.cells) {
    const int selected = run.selected_lambda.at(c.key.method) == c.key.lambda;
    for (std::size_t i = 0; i < c.trajectory.times.size(); ++i)
      out += fmt::format("{},{},{},{},{},{}\n", c.key.method, num(c.key.lambda), c.key.seed, selected,
                         num(c.trajectory.times[i]), num(c.trajectory.values[i]));
  }
  return out;
}

std::string monitoring_csv(const MonitoringSummary& m) {
  std::string out = "score,spearman\n";
  out += "drift_s2," + num(m.drift) + "\n";
  out += "gain_g," + num(m.gain) + "\n";
  out += "product_h," + num(m.product) + "\n";
  out += "roll2_h," + num(m.roll2) + "\n";
  out += "roll3_h," + num(m.roll3) + "\n";
  return out;
}

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
# Renders the figures of a driftguard run directory: python3 plot_figures.py [run_dir]
import csv, os, sys
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

run = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))

def rows(name):
    path = os.path.join(run, name)
    if not os.path.exists(path):
        return []
    with open(path) as f:
        return list(csv.DictReader(f))

scatter = rows("scatter.csv")
if scatter:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    for label in sorted({(r["method"], r["lambda"]) for r in scatter}):
        pts = [r for r in scatter if (r["method"], r["lambda"]) == label]
        ax.scatter([float(r["poincare_rhs"]) for r in pts], [float(r["volatility"]) for r in pts],
                   s=12, label=f"{label[0]} λ={label[1]}")
    lim = max(float(r["poincare_rhs"]) for r in scatter)
    ax.plot([0, lim], [0, lim], "k--", lw=0.8)
    ax.set_xlabel("(T/π²)∫(r')² dt")
    ax.set_ylabel("Var_U r(U)")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(os.path.join(run, "volatility_vs_energy.png"), dpi=150)

ratios = rows("ratios.csv")
for panel in sorted({r["panel"] for r in ratios}):
    sel = [r for r in ratios if r["panel"] == panel]
    methods = sorted({r["method"] for r in sel})
    metrics = list(dict.fromkeys(r["metric"] for r in sel))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(1, len(methods))
    for i, m in enumerate(methods):
        vals = [next(float(r["ratio"]) for r in sel if r["method"] == m and r["metric"] == k) for k in metrics]
        ax.bar([j + i * width for j in range(len(metrics))], vals, width, label=m)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(metrics))])
    ax.set_xticklabels(metrics, rotation=20, fontsize=7)
    ax.set_yscale("log")
    ax.set_title(panel, fontsize=8)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(run, f"ratios_{panel}.png"), dpi=150)

curves = [r for r in rows("risk_curves.csv") if r["selected"] == "1"]
if curves:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for m in sorted({r["method"] for r in curves}):
        sel = [r for r in curves if r["method"] == m]
        times = sorted({float(r["time"]) for r in sel})
        mean = [sum(float(r["risk"]) for r in sel if float(r["time"]) == t) /
                sum(1 for r in sel if float(r["time"]) == t) for t in times]
        ax.plot(times, mean, marker="o", ms=3, label=m)
    ax.set_xlabel("deployment time")
    ax.set_ylabel("risk")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(run, "risk_curves.png"), dpi=150)
)PY";

std::string metadata_json(const RunSummary& run, const std::string& cache_hash) {
  nlohmann::ordered_json j;
  j["tool"] = "driftguard";
  j["format_version"] = 1;
  j["experiment"] = to_string(run.config.experiment);
  j["cells"] = run.cells.size();
  j["seeds"] = run.config.seeds.size();
  j["dataset_sha256"] = run.dataset_sha256;
  if (!cache_hash.empty()) j["dataset_cache_sha256"] = cache_hash;
  nlohmann::ordered_json sel;
  for (const auto& [m, l] : run.selected_lambda) sel[m] = l;
  j["selected_lambda"] = sel;
  j["report_units"] = is_synthetic(run.config.experiment)
                          ? "risk: binary cross-entropy on logits"
                          : "risk: mean squared error in target units; gains in standardized-target score units";
  return j.dump(2) + "\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string write_run(const RunSummary& run, const std::string& dir) {
  const fs::path root(dir);
  for (const char* sub : {"", "bounds", "hazard", "models", "subspaces"}) fs::create_directories(root / sub);

  write_text(root / "config.json", config_json(run.config));
  write_text(root / "cells.csv", cells_csv(run));
  write_text(root / "selection.csv", selection_csv(run));
  write_text(root / "summary.csv", summary_csv(run));
  write_text(root / "paired.csv", paired_csv(run));
  write_text(root / "ratios.csv", ratios_csv(run));
  write_text(root / "scatter.csv", scatter_csv(run));
  write_text(root / "risk_curves.csv", risk_curves_csv(run));
  if (run.monitoring) write_text(root / "monitoring.csv", monitoring_csv(*run.monitoring));
  for (const auto& c : run.cells) {
    write_text(root / "bounds" / (c.key.str() + ".json"), bound_report_json(c.bounds) + "\n");
    if (c.hazard) write_text(root / "hazard" / (c.key.str() + ".csv"), hazard_csv(*c.hazard));
    if (run.config.save_models) save_checkpoint(c.model, (root / "models" / (c.key.str() + ".ckpt")).string());
  }
  for (const auto& [name, v] : run.subspaces) write_subspace_csv(v, (root / "subspaces" / (name + ".csv")).string());
  std::string cache_hash;
  if (run.series) {
    fs::create_directories(root / "data");
    write_dataset_cache(*run.series, (root / "data" / "dataset.cache").string());
    cache_hash = sha256_file((root / "data" / "dataset.cache").string());
  }
  write_text(root / "plot_figures.py", kPlotScript);
  write_text(root / "metadata.json", metadata_json(run, cache_hash));
  return root.string();
}

ExperimentContext load_run_context(const std::string& dir) {
  const fs::path root(dir);
  ExperimentConfig cfg = load_config((root / "config.json").string());
  if (is_synthetic(cfg.experiment)) return ExperimentContext(cfg);
  return ExperimentContext(cfg, read_dataset_cache((root / "data" / "dataset.cache").string()));
}

VerifyResult verify_run(const std::string& dir) {
  const fs::path root(dir);
  const ExperimentContext ctx = load_run_context(dir);
  std::map<std::string, MethodSpec> methods;
  for (const auto& m : ctx.config().methods()) methods.emplace(m.name, m);

  VerifyResult out;
  std::istringstream cells(read_text(root / "cells.csv"));
  std::string line;
  std::getline(cells, line);
  while (std::getline(cells, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 3) throw DataError("malformed cells.csv line: " + line);
    const auto it = methods.find(fields[0]);
    if (it == methods.end()) throw DataError("cells.csv names an unknown method: " + fields[0]);
    const CellKey key{fields[0], std::strtod(fields[1].c_str(), nullptr), std::stoull(fields[2])};
    const fs::path ckpt = root / "models" / (key.str() + ".ckpt");
    if (!fs::exists(ckpt)) throw DataError("missing checkpoint " + ckpt.string() + " (run written without models?)");
    const BoundReport saved = bound_report_from_json(read_text(root / "bounds" / (key.str() + ".json")));
    const BoundReport fresh =
        ctx.evaluate(it->second, key.lambda, key.seed, load_checkpoint(ckpt.string())).bounds;

    const std::pair<double, double> pairs[] = {{saved.volatility, fresh.volatility},
                                               {saved.derivative_energy, fresh.derivative_energy},
                                               {saved.jv_energy, fresh.jv_energy},
                                               {saved.b_v, fresh.b_v},
                                               {saved.b_rho, fresh.b_rho},
                                               {saved.beta, fresh.beta}};
    for (const auto& [a, b] : pairs) {
      const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
      out.max_relative_mismatch = std::max(out.max_relative_mismatch, a == b ? 0.0 : rel);
    }
    ++out.checked;
    if (!fresh.holds_poincare) {
      ++out.poincare_failures;
      out.messages.push_back(fmt::format("{}: volatility {} exceeds (T/π²)·energy {}", key.str(), fresh.volatility,
                                         fresh.poincare_rhs));
    }
    if (!fresh.holds_jv) {
      ++out.jv_failures;
      out.messages.push_back(fmt::format("{}: volatility {} exceeds Jacobian-velocity bound {}", key.str(),
                                         fresh.volatility, fresh.jv_rhs));
    }
    if (!fresh.holds_lowrank) {
      ++out.lowrank_failures;
      out.messages.push_back(
          fmt::format("{}: volatility {} exceeds low-rank bound {}", key.str(), fresh.volatility, fresh.lowrank_rhs));
    }
  }
  return out;
}

}  // namespace driftguard
