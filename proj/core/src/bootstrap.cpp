#include "delibq/bootstrap.hpp"

#include <algorithm>
#include <utility>
#include <vector>

#include "delibq/error.hpp"
#include "delibq/stats.hpp"

namespace delibq {
namespace {

constexpr double kLowerTail = 0.025;
constexpr double kUpperTail = 0.975;

double resampled_mean(std::span<const double> xs, Rng& rng) {
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) sum += xs[rng.below(xs.size())];
  return sum / static_cast<double>(xs.size());
}

BootstrapCI finish(double point, std::vector<double>& stats, int resamples, std::uint64_t seed) {
  std::sort(stats.begin(), stats.end());
  return BootstrapCI{point, sorted_quantile(stats, kLowerTail), sorted_quantile(stats, kUpperTail), resamples, seed};
}

void check_resamples(int resamples) {
  if (resamples < 1) throw AnalysisError("bootstrap needs at least one resample");
}

}  // namespace

BootstrapCI bootstrap_mean(std::span<const double> xs, int resamples, std::uint64_t seed) {
  if (xs.empty()) throw AnalysisError("bootstrap of an empty sample");
  check_resamples(resamples);
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  Rng rng(seed);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  for (auto& s : stats) s = resampled_mean(sorted, rng);
  return finish(mean(sorted), stats, resamples, seed);
}

BootstrapCI bootstrap_mean_diff(std::span<const double> a, std::span<const double> b, Pairing pairing, int resamples,
                                std::uint64_t seed) {
  if (a.empty() || b.empty()) throw AnalysisError("bootstrap of an empty sample");
  check_resamples(resamples);
  Rng rng(seed);
  std::vector<double> stats(static_cast<std::size_t>(resamples));

  if (pairing == Pairing::kPaired) {
    if (a.size() != b.size()) throw AnalysisError("paired bootstrap needs samples of equal length");
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) pairs.emplace_back(a[i], b[i]);
    std::sort(pairs.begin(), pairs.end());
    std::vector<double> diffs;
    diffs.reserve(pairs.size());
    for (const auto& [x, y] : pairs) diffs.push_back(x - y);
    for (auto& s : stats) s = resampled_mean(diffs, rng);
    // Equal to mean(a) - mean(b); taken over the differences so the point
    // estimate and the resamples share rounding.
    return finish(mean(diffs), stats, resamples, seed);
  }

  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  for (auto& s : stats) {
    const double ma = resampled_mean(sa, rng);
    s = ma - resampled_mean(sb, rng);
  }
  return finish(mean(sa) - mean(sb), stats, resamples, seed);
}

}  // namespace delibq
