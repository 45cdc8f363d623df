#include "driftguard/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "driftguard/error.hpp"
#include "driftguard/rng.hpp"

namespace driftguard {

Vector midranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  Vector ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw ValidationError("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman: length mismatch");
  if (x.size() < 3) throw ValidationError(fmt::format("spearman needs at least 3 pairs (got {})", x.size()));
  const Vector rx = midranks(x), ry = midranks(y);
  return pearson(rx, ry);
}

MovementPairs risk_movement_pairs(std::span<const double> score, std::span<const double> risks) {
  if (score.size() != risks.size()) throw ShapeError("score and risks must be indexed by the same blocks");
  MovementPairs p;
  for (std::size_t t = 0; t + 1 < risks.size(); ++t) {
    if (!std::isfinite(score[t])) continue;
    const double dr = risks[t + 1] - risks[t];
    p.score.push_back(score[t]);
    p.movement.push_back(dr * dr);
  }
  return p;
}

double spearman_vs_risk_movement(std::span<const double> score, std::span<const double> risks) {
  const auto p = risk_movement_pairs(score, risks);
  return spearman(p.score, p.movement);
}

double pooled_spearman(const std::vector<MovementPairs>& per_seed) {
  Vector xs, ys;
  for (const auto& p : per_seed) {
    if (p.score.empty()) continue;
    const double n = static_cast<double>(p.score.size());
    const double denom = n > 1 ? n - 1.0 : 1.0;
    const Vector rx = midranks(p.score), ry = midranks(p.movement);
    for (std::size_t i = 0; i < rx.size(); ++i) {
      xs.push_back((rx[i] - 1.0) / denom);
      ys.push_back((ry[i] - 1.0) / denom);
    }
  }
  return spearman(xs, ys);
}

double nearest_rank_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of empty sample");
  const double pos = std::ceil(q * static_cast<double>(sorted.size()));
  const std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(sorted.size()))) - 1;
  return sorted[idx];
}

PairedComparison paired_comparison(std::span<const double> a, std::span<const double> b, std::size_t n_boot,
                                   std::uint64_t seed) {
  if (a.size() != b.size()) throw ShapeError(fmt::format("paired comparison: {} vs {} seeds", a.size(), b.size()));
  if (a.empty()) throw ValidationError("paired comparison needs at least one seed");
  if (n_boot == 0) throw ValidationError("bootstrap needs at least one resample");
  PairedComparison out;
  out.n = a.size();
  Vector diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = a[i] - b[i];
    if (a[i] < b[i]) ++out.wins;
  }
  out.mean_diff = mean(diff);

  Rng rng = Rng::for_stream(seed, Stream::bootstrap);
  Vector boot(n_boot);
  for (auto& m : boot) {
    double s = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) s += diff[rng.uniform_index(diff.size())];
    m = s / static_cast<double>(diff.size());
  }
  std::sort(boot.begin(), boot.end());
  out.ci_low = nearest_rank_quantile(boot, 0.025);
  out.ci_high = nearest_rank_quantile(boot, 0.975);
  return out;
}

}  // namespace driftguard
