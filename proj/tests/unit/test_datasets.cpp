#include <cmath>

#include <gtest/gtest.h>

#include "driftguard/datasets.hpp"
#include "driftguard/error.hpp"
#include "fixtures.hpp"

using namespace driftguard;

namespace {

double speed_reference(double t) {
  const double a = (t - 0.33) / 0.10, b = (t - 0.76) / 0.08;
  return 0.55 + 1.05 * std::exp(-a * a) + 0.75 * std::exp(-b * b);
}

}  // namespace

TEST(Synthetic, DriftSpeedKnownValues) {
  EXPECT_NEAR(drift_speed(0.33), 1.6, 1e-6);
  for (double t = 0.0; t <= 1.0; t += 0.05) EXPECT_NEAR(drift_speed(t), speed_reference(t), 1e-15);
}

TEST(Synthetic, DriftOffsetMatchesQuadrature) {
  EXPECT_EQ(drift_offset(0.0), 0.0);
  // Composite Simpson on 20000 panels.
  constexpr int n = 20000;
  const double h = 1.0 / n;
  double s = speed_reference(0.0) + speed_reference(1.0);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * speed_reference(i * h);
  EXPECT_NEAR(drift_offset(1.0), s * h / 3.0, 1e-9);
  // Derivative of the closed form is the speed.
  for (double t : {0.1, 0.33, 0.5, 0.76, 0.9})
    EXPECT_NEAR((drift_offset(t + 1e-6) - drift_offset(t - 1e-6)) / 2e-6, drift_speed(t), 1e-7);
}

TEST(Synthetic, ClassConditionalMeans) {
  constexpr std::size_t n = 400000;
  for (double t : {0.0, 0.5}) {
    const auto s = sample_synthetic(t, n, 3);
    double m1[2] = {0, 0}, m2[2] = {0, 0};
    std::size_t c[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int y = static_cast<int>(s.y[i]);
      ASSERT_TRUE(y == 0 || y == 1);
      m1[y] += s.x(i, 0);
      m2[y] += s.x(i, 1);
      ++c[y];
    }
    EXPECT_NEAR(static_cast<double>(c[1]) / n, 0.5, 4 * 0.5 / std::sqrt(n));
    for (int y = 0; y < 2; ++y) {
      const double sgn = 2.0 * y - 1.0;
      const double k = static_cast<double>(c[y]);
      EXPECT_NEAR(m1[y] / k, 1.05 * sgn, 4 * 0.90 / std::sqrt(k));
      EXPECT_NEAR(m2[y] / k, 1.25 * sgn + drift_offset(t), 4 * 0.55 / std::sqrt(k));
    }
  }
}

TEST(Synthetic, DeterministicAndVelocity) {
  const auto a = sample_synthetic(0.4, 100, 9);
  const auto b = sample_synthetic(0.4, 100, 9);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  Rng rng(1);
  const auto base = sample_synthetic_base(5, rng);
  const Matrix v = base.velocities_at(0.33);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(v(i, 0), 0.0);
    EXPECT_EQ(v(i, 1), drift_speed(0.33));
  }
  // Positions move only along e2 by δ(t).
  const Matrix x0 = base.features_at(0.0), x1 = base.features_at(0.7);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(x0(i, 0), x1(i, 0));
    EXPECT_NEAR(x1(i, 1) - x0(i, 1), drift_offset(0.7), 1e-14);
  }
}

TEST(Synthetic, TimeGrid) {
  const Vector g = synthetic_time_grid(5);
  EXPECT_EQ(g, (Vector{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_THROW(synthetic_time_grid(1), ValidationError);
}

TEST(AirQuality, FullTimelineSplits) {
  const auto dir = fixtures::temp_dir("aq");
  const auto path = dir / "AirQualityUCI.csv";
  auto missing = [](std::size_t i) { return i % 10 == 3; };
  fixtures::write_air_quality(path, missing);
  const BlockedSeries s = load_air_quality(path.string(), {false});

  // Raw windows: 84 days and 28 days of hourly rows from the first timestamp.
  std::size_t kept_train = 0, kept_val = 0, kept_deploy = 0;
  for (std::size_t i = 0; i < 9357; ++i) {
    if (missing(i)) continue;
    if (i < 84 * 24) ++kept_train;
    else if (i < 112 * 24) ++kept_val;
    else ++kept_deploy;
  }
  const SplitCounts counts = split_counts(s);
  EXPECT_EQ(counts.train, kept_train);
  EXPECT_EQ(counts.val, kept_val);
  EXPECT_EQ(counts.deploy, kept_deploy);
  // Deployment starts 112 days in and the last row is 389 days 20 hours in:
  // 277.83 days of deployment cover 20 fourteen-day blocks.
  EXPECT_EQ(counts.deploy_blocks, 20u);
  EXPECT_EQ(s.num_blocks(), 22u);
  EXPECT_EQ(s.block_time_spans[2].first, 112.0);
  EXPECT_NEAR(s.block_time_spans.back().second, 9357.0 / 24.0, 1e-12);
  EXPECT_EQ(s.feature_names[0], "PT08.S1(CO)");
  EXPECT_EQ(s.target_name, "CO(GT)");
}

TEST(AirQuality, StandardizationAndMissingRows) {
  const auto dir = fixtures::temp_dir("aq_std");
  const auto path = dir / "AirQualityUCI.csv";
  fixtures::write_air_quality(path, [](std::size_t i) { return i % 10 == 3; });
  const BlockedSeries s = load_air_quality(path.string(), {false});
  const auto train = s.rows_with_role(BlockRole::train);
  for (std::size_t c = 0; c < s.dim(); ++c) {
    double m = 0.0, v = 0.0;
    for (auto i : train) m += s.features(i, c);
    m /= static_cast<double>(train.size());
    for (auto i : train) v += (s.features(i, c) - m) * (s.features(i, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(v / static_cast<double>(train.size())), 1.0, 1e-9);
  }
  EXPECT_TRUE(s.target_standardized);
  // Undo the scaling and recover the written values (decimal commas parsed).
  std::size_t row = 0;
  for (std::size_t i = 0; i < 9357 && row < 50; ++i) {
    if (i % 10 == 3) continue;
    for (std::size_t c = 0; c < s.dim(); ++c) {
      const double raw = s.features(row, c) * s.standardization[c].std + s.standardization[c].mean;
      EXPECT_NEAR(raw, fixtures::aq_feature(i, c), 1e-9);
    }
    EXPECT_NEAR(s.targets[row] * s.target_scaling.std + s.target_scaling.mean, fixtures::aq_target(i), 1e-12);
    ++row;
  }
  // No raw -200 survives.
  for (std::size_t r = 0; r < s.features.rows(); ++r)
    for (std::size_t c = 0; c < s.dim(); ++c)
      EXPECT_NE(s.features(r, c) * s.standardization[c].std + s.standardization[c].mean, -200.0);
}

TEST(AirQuality, ReferenceCountMismatchIsDataError) {
  const auto dir = fixtures::temp_dir("aq_counts");
  const auto path = dir / "AirQualityUCI.csv";
  fixtures::write_air_quality(path);
  try {
    load_air_quality(path.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("1573/580/5191/20"), std::string::npos) << e.what();
  }
}

TEST(AirQuality, MalformedInput) {
  const auto dir = fixtures::temp_dir("aq_bad");
  const auto path = dir / "bad.csv";
  {
    std::ofstream out(path);
    out << "Date;Time;CO(GT)\n";
  }
  EXPECT_THROW(load_air_quality(path.string(), {false}), DataError);
  EXPECT_THROW(load_air_quality((dir / "absent.csv").string(), {false}), DataError);
}

TEST(Tetouan, CalendarSplitsMatchReferenceCounts) {
  const auto dir = fixtures::temp_dir("tet");
  const auto path = dir / "Tetuan City power consumption.csv";
  ASSERT_EQ(fixtures::write_tetouan(path), 52416u);
  // Ten-minute cadence: Jan-Apr 120 days, May-Jun 61 days, Jul 1-Dec 30 183 days.
  const BlockedSeries s = load_tetouan(path.string());
  EXPECT_EQ(split_counts(s), (SplitCounts{120 * 144, 61 * 144, 183 * 144, 6}));
  EXPECT_EQ(split_counts(s), kTetouanCounts);
  EXPECT_FALSE(s.target_standardized);
  EXPECT_EQ(s.targets[0], fixtures::tet_target(0));
  EXPECT_EQ(s.feature_names[2], "Wind Speed");
  EXPECT_EQ(s.target_name, "Zone 1 Power Consumption");
  // Month blocks.
  const auto deploy = s.blocks_with_role(BlockRole::deploy);
  ASSERT_EQ(deploy.size(), 6u);
  EXPECT_EQ(s.rows_in_block(deploy[0]).size(), 31u * 144);
  EXPECT_EQ(s.rows_in_block(deploy[5]).size(), 30u * 144);
}

TEST(Tetouan, ShortFileFailsReferenceCounts) {
  const auto dir = fixtures::temp_dir("tet_short");
  const auto path = dir / "short.csv";
  fixtures::write_tetouan(path, 200);
  EXPECT_THROW(load_tetouan(path.string()), DataError);
  const BlockedSeries s = load_tetouan(path.string(), {false});
  EXPECT_EQ(split_counts(s).train, 120u * 144);
}

TEST(Loaders, DeterministicAndCacheRoundTrip) {
  const auto dir = fixtures::temp_dir("cache");
  const auto path = dir / "aq.csv";
  fixtures::write_air_quality(path, [](std::size_t i) { return i % 7 == 0; });
  const BlockedSeries a = load_air_quality(path.string(), {false});
  const BlockedSeries b = load_air_quality(path.string(), {false});
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_EQ(a.source_sha256, sha256_file(path.string()));

  const auto cache = (dir / "dataset.cache").string();
  write_dataset_cache(a, cache);
  const BlockedSeries c = read_dataset_cache(cache);
  EXPECT_EQ(c.features, a.features);
  EXPECT_EQ(c.targets, a.targets);
  EXPECT_EQ(c.block_ids, a.block_ids);
  EXPECT_EQ(c.roles, a.roles);
  EXPECT_EQ(c.block_time_spans, a.block_time_spans);
  EXPECT_EQ(c.feature_names, a.feature_names);
  EXPECT_EQ(c.target_scaling.mean, a.target_scaling.mean);
  EXPECT_EQ(c.target_scaling.std, a.target_scaling.std);
  EXPECT_EQ(c.source_sha256, a.source_sha256);
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
