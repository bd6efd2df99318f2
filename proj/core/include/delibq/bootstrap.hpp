#pragma once

#include <cstdint>
#include <span>

namespace delibq {

inline constexpr int kDefaultResamples = 10000;

struct BootstrapCI {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int resamples = 0;
  std::uint64_t seed = 0;
};

enum class Pairing { kPaired, kUnpaired };

/// Percentile bootstrap (2.5%, 97.5%) for mean(a) - mean(b).
///
/// Paired mode resamples per-index differences; unpaired mode resamples the
/// two samples independently. Inputs are put in a canonical order before
/// resampling, so the result depends only on the multisets of values (or of
/// pairs) and the seed.
BootstrapCI bootstrap_mean_diff(std::span<const double> a, std::span<const double> b, Pairing pairing,
                                int resamples = kDefaultResamples, std::uint64_t seed = 0);

/// Percentile bootstrap for the mean of one sample.
BootstrapCI bootstrap_mean(std::span<const double> xs, int resamples = kDefaultResamples, std::uint64_t seed = 0);

}  // namespace delibq
