#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "driftguard/linalg.hpp"

namespace driftguard {

/// 1-based ranks; ties share the mean of the ranks they span.
Vector midranks(std::span<const double> xs);

/// Pearson correlation of midranks. Throws ValidationError for < 3 pairs and
/// returns NaN when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// (score_t, (r_{t+1} − r_t)²) pairs over blocks where score_t is finite.
/// `score` and `risks` are indexed by block.
struct MovementPairs {
  Vector score;
  Vector movement;
};
MovementPairs risk_movement_pairs(std::span<const double> score, std::span<const double> risks);

/// Spearman of a per-block score against next-block squared risk change.
double spearman_vs_risk_movement(std::span<const double> score, std::span<const double> risks);

/// Cross-seed aggregate: within each seed both sides are replaced by
/// midranks scaled to [0, 1], the pairs are pooled, then one Spearman is taken.
double pooled_spearman(const std::vector<MovementPairs>& per_seed);

struct PairedComparison {
  std::size_t wins = 0;     // count(a_i < b_i)
  double mean_diff = 0.0;   // mean(a − b)
  double ci_low = 0.0;      // percentile bootstrap, 95%
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Paired seed comparison with a seeded percentile bootstrap over seed indices.
/// The CI endpoints are nearest-rank quantiles: sorted[ceil(q·B) − 1].
PairedComparison paired_comparison(std::span<const double> a, std::span<const double> b, std::size_t n_boot = 10000,
                                   std::uint64_t seed = 0);

/// Nearest-rank quantile of a sorted sample.
double nearest_rank_quantile(std::span<const double> sorted, double q);

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

}  // namespace driftguard
