#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace delibq {

double mean(std::span<const double> xs);

/// Unbiased (n - 1) sample variance. Zero for fewer than two values.
double sample_variance(std::span<const double> xs);
double sample_stddev(std::span<const double> xs);

/// Linear-interpolation quantile (Hyndman & Fan type 7) of an already
/// sorted sample; p in [0, 1].
double sorted_quantile(std::span<const double> sorted, double p);

/// Pearson product-moment correlation. Throws AnalysisError when either
/// variable has zero variance or fewer than two pairs are given.
double pearson(std::span<const double> x, std::span<const double> y);

struct ProportionInterval {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
ProportionInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = kZ95);

/// Seeded generator with platform-independent output. Draws indices with
/// rejection sampling so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace delibq
