#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "delibq/bootstrap.hpp"
#include "delibq/error.hpp"
#include "delibq/reliability.hpp"
#include "delibq/stats.hpp"
#include "oracles.hpp"

using namespace delibq;

TEST(Stats, QuantileType7) {
  const std::vector<double> xs{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 1.0), 5.0);
}

TEST(Stats, WilsonMatchesClosedForm) {
  // 10/20 at z = 1.96: centre 0.5, half-width z*sqrt(0.25/20 + z^2/1600) / (1 + z^2/20).
  const double z = kZ95;
  const double denom = 1 + z * z / 20;
  const double half = z * std::sqrt(0.5 * 0.5 / 20 + z * z / (4.0 * 400)) / denom;
  const auto ci = wilson_interval(10, 20);
  EXPECT_NEAR(ci.lo, 0.5 - half, 1e-15);
  EXPECT_NEAR(ci.hi, 0.5 + half, 1e-15);
  const auto zero = wilson_interval(0, 10);
  EXPECT_EQ(zero.lo, 0.0);
  EXPECT_GT(zero.hi, 0.0);
}

TEST(Stats, PearsonRejectsConstantInput) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(pearson(x, y), AnalysisError);
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
}

TEST(Stats, RngIsReproducibleAndUniform) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.below(7), b.below(7));
  Rng r(1);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[r.below(5)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Reliability, NullVarianceFiveOptionsIsTwo) { EXPECT_EQ(uniform_null_variance(5), 2.0); }

TEST(Reliability, PerfectAgreementIsOne) {
  auto m = RatingMatrix::from_rows({{3, 3, 3}, {5, 5, 5}});
  EXPECT_EQ(rwg_star(m).r_wg_star, 1.0);
  EXPECT_EQ(rwg_star(m).s_x_squared, 0.0);
}

TEST(Reliability, OneAndFiveSplitIsNegative) {
  // Scores {1, 5}: sample variance 8, r = 1 - 8/2 = -3.
  auto m = RatingMatrix::from_rows({{1, 5}});
  EXPECT_DOUBLE_EQ(rwg_star(m).r_wg_star, -3.0);
  EXPECT_EQ(irr_band(-3.0), IrrBand::kLack);
}

TEST(Reliability, NeedsTwoRatersAndCompleteMatrix) {
  EXPECT_THROW(rwg_star(RatingMatrix::from_rows({{3}})), InputError);
  RatingMatrix m({"s1"}, {"a", "b"});
  m.set(0, 0, 3);
  EXPECT_THROW(rwg_star(m), InputError);
  EXPECT_THROW(m.set(0, 1, 6), InputError);
}

TEST(Reliability, BandBoundaries) {
  EXPECT_EQ(irr_band(0.30), IrrBand::kLack);
  EXPECT_EQ(irr_band(0.3051), IrrBand::kWeak);
  EXPECT_EQ(irr_band(0.31), IrrBand::kWeak);
  EXPECT_EQ(irr_band(0.50), IrrBand::kWeak);
  EXPECT_EQ(irr_band(0.51), IrrBand::kModerate);
  EXPECT_EQ(irr_band(0.70), IrrBand::kModerate);
  EXPECT_EQ(irr_band(0.71), IrrBand::kStrong);
  EXPECT_EQ(irr_band(0.90), IrrBand::kStrong);
  EXPECT_EQ(irr_band(0.91), IrrBand::kVeryStrong);
  EXPECT_EQ(irr_band(1.0), IrrBand::kVeryStrong);
  EXPECT_EQ(to_string(IrrBand::kVeryStrong), "very-strong");
}

TEST(Reliability, MatchesVarianceLoopOracle) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 1 + static_cast<int>(gen() % 10), r = 2 + static_cast<int>(gen() % 7);
    oracle::Matrix rows(s, std::vector<int>(r));
    for (auto& row : rows)
      for (auto& x : row) x = 1 + static_cast<int>(gen() % 5);
    EXPECT_NEAR(rwg_star(RatingMatrix::from_rows(rows)).r_wg_star, oracle::rwg_star(rows), 1e-12);
  }
}

TEST(Reliability, InvariantUnderRaterAndStatementPermutation) {
  oracle::Matrix rows{{1, 2, 4}, {5, 5, 3}, {2, 2, 2}, {4, 1, 3}};
  const double base = rwg_star(RatingMatrix::from_rows(rows)).r_wg_star;
  std::reverse(rows.begin(), rows.end());
  for (auto& row : rows) std::rotate(row.begin(), row.begin() + 1, row.end());
  EXPECT_NEAR(rwg_star(RatingMatrix::from_rows(rows)).r_wg_star, base, 1e-12);
}

TEST(Reliability, ConstantRowNeverLowersAgreement) {
  std::mt19937_64 gen(21);
  for (int run = 0; run < 500; ++run) {
    const int n = 1 + static_cast<int>(gen() % 10), k = 2 + static_cast<int>(gen() % 7);
    oracle::Matrix rows(n, std::vector<int>(k));
    for (auto& row : rows)
      for (auto& x : row) x = 1 + static_cast<int>(gen() % 5);
    const double before = rwg_star(RatingMatrix::from_rows(rows)).r_wg_star;
    auto flat = rows;
    auto& row = flat[gen() % n];
    std::fill(row.begin(), row.end(), 1 + static_cast<int>(gen() % 5));
    EXPECT_GE(rwg_star(RatingMatrix::from_rows(flat)).r_wg_star, before - 1e-12);
  }
}

TEST(Bootstrap, ConstantPairedIsDegenerate) {
  const std::vector<double> a{2, 2, 2, 2};
  const auto ci = bootstrap_mean_diff(a, a, Pairing::kPaired, 500, 1);
  EXPECT_EQ(ci.point, 0.0);
  EXPECT_EQ(ci.lo, 0.0);
  EXPECT_EQ(ci.hi, 0.0);
}

TEST(Bootstrap, ConstantShiftPairedIsExact) {
  const std::vector<double> b{1, 2.5, 3, 4.25, 2};
  std::vector<double> a;
  for (double x : b) a.push_back(x + 1);
  const auto ci = bootstrap_mean_diff(a, b, Pairing::kPaired, 1000, 3);
  EXPECT_EQ(ci.point, 1.0);
  EXPECT_EQ(ci.lo, 1.0);
  EXPECT_EQ(ci.hi, 1.0);
}

TEST(Bootstrap, DeterministicAndPermutationInvariant) {
  std::vector<double> a{1, 4, 2, 5, 3, 3, 2}, b{2, 2, 3, 1, 5, 4, 4};
  const auto first = bootstrap_mean_diff(a, b, Pairing::kUnpaired, 2000, 99);
  const auto again = bootstrap_mean_diff(a, b, Pairing::kUnpaired, 2000, 99);
  EXPECT_EQ(first.lo, again.lo);
  EXPECT_EQ(first.hi, again.hi);
  std::reverse(a.begin(), a.end());
  std::rotate(b.begin(), b.begin() + 3, b.end());
  const auto permuted = bootstrap_mean_diff(a, b, Pairing::kUnpaired, 2000, 99);
  EXPECT_EQ(first.lo, permuted.lo);
  EXPECT_EQ(first.hi, permuted.hi);
  EXPECT_LE(first.lo, first.point);
  EXPECT_LE(first.point, first.hi);
}

TEST(Bootstrap, PairedPermutationOfPairsIsInvariant) {
  std::vector<double> a{1, 4, 2, 5, 3}, b{2, 2, 3, 1, 5};
  const auto first = bootstrap_mean_diff(a, b, Pairing::kPaired, 2000, 4);
  std::reverse(a.begin(), a.end());
  std::reverse(b.begin(), b.end());
  const auto second = bootstrap_mean_diff(a, b, Pairing::kPaired, 2000, 4);
  EXPECT_EQ(first.point, second.point);
  EXPECT_EQ(first.lo, second.lo);
  EXPECT_EQ(first.hi, second.hi);
}

TEST(Bootstrap, EmptyInputIsAnError) {
  const std::vector<double> empty, one{1};
  EXPECT_THROW(bootstrap_mean_diff(empty, one, Pairing::kUnpaired), AnalysisError);
  EXPECT_THROW(bootstrap_mean(empty), AnalysisError);
  EXPECT_THROW(bootstrap_mean_diff(one, std::vector<double>{1, 2}, Pairing::kPaired), AnalysisError);
}
