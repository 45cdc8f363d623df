#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "driftguard/linalg.hpp"
#include "driftguard/rng.hpp"

using namespace driftguard;

TEST(Linalg, MatmulSmallKnown) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  EXPECT_EQ(matmul(a, b), (Matrix{{19, 22}, {43, 50}}));
  EXPECT_EQ(matmul_tn(a, b), matmul(a.transpose(), b));
  EXPECT_EQ(matvec(a, Vector{1, 1}), (Vector{3, 7}));
  EXPECT_EQ(matvec_t(a, Vector{1, 1}), (Vector{4, 6}));
}

TEST(Linalg, ColumnMeansAndSelection) {
  const Matrix x{{1, 10, 100}, {3, 30, 300}};
  EXPECT_EQ(column_means(x), (Vector{2, 20, 200}));
  const std::size_t cols[] = {2, 0};
  EXPECT_EQ(select_columns(x, cols), (Matrix{{100, 1}, {300, 3}}));
  const std::size_t rows[] = {1};
  EXPECT_EQ(select_rows(x, rows), (Matrix{{3, 30, 300}}));
}

TEST(Linalg, CholeskySolve) {
  const Matrix a{{4, 2}, {2, 3}};
  Vector x;
  ASSERT_TRUE(cholesky_solve(a, Vector{2, 5}, x));
  EXPECT_NEAR(x[0], -0.5, 1e-14);
  EXPECT_NEAR(x[1], 2.0, 1e-14);
  EXPECT_FALSE(cholesky_solve(Matrix{{1, 2}, {2, 1}}, Vector{1, 1}, x));
}

TEST(Linalg, OrthonormalityDefect) {
  EXPECT_EQ(orthonormality_defect(Matrix::identity(3)), 0.0);
  EXPECT_NEAR(orthonormality_defect(Matrix{{1, 1}, {0, 1}}), 1.0, 1e-15);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, StreamsAreIndependentOfEachOther) {
  auto init = Rng::for_stream(7, Stream::init);
  auto shuffle = Rng::for_stream(7, Stream::shuffle);
  EXPECT_NE(init.next_u64(), shuffle.next_u64());
  auto init2 = Rng::for_stream(7, Stream::init);
  auto first = Rng::for_stream(7, Stream::init).next_u64();
  EXPECT_EQ(init2.next_u64(), first);
}

TEST(Rng, UniformRangeAndMoments) {
  Rng r(1);
  constexpr int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double m = sum / n;
  EXPECT_NEAR(m, 0.5, 4 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum2 / n - m * m, 1.0 / 12.0, 2e-3);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  constexpr int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 4 * std::sqrt(n / 7.0));
}

TEST(Rng, NormalMoments) {
  Rng r(9);
  constexpr int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}
