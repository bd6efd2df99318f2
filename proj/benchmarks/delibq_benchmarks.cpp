#include <random>

#include <benchmark/benchmark.h>

#include "delibq/benchmarking.hpp"
#include "delibq/bootstrap.hpp"
#include "delibq/nudge.hpp"
#include "delibq/reliability.hpp"

using namespace delibq;

namespace {

std::vector<std::vector<int>> random_rows(std::size_t statements, std::size_t raters, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::vector<int>> rows(statements, std::vector<int>(raters));
  for (auto& row : rows)
    for (auto& x : row) x = 1 + static_cast<int>(gen() % 5);
  return rows;
}

void BM_RwgStar(benchmark::State& state) {
  const auto m = RatingMatrix::from_rows(random_rows(static_cast<std::size_t>(state.range(0)), 8, 1));
  for (auto _ : state) benchmark::DoNotOptimize(rwg_star(m));
}
BENCHMARK(BM_RwgStar)->Arg(30)->Arg(1000);

void BM_CompareModelVsGroups(benchmark::State& state) {
  const auto m = RatingMatrix::from_rows(random_rows(30, 8, 2));
  std::vector<double> model(30, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(compare_model_vs_groups(m, model, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_CompareModelVsGroups)->DenseRange(1, 3);

void BM_BootstrapUnpaired(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (auto& x : a) x = z(gen);
  for (auto& x : b) x = z(gen);
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_mean_diff(a, b, Pairing::kUnpaired, 10'000, 1));
}
BENCHMARK(BM_BootstrapUnpaired)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_LinkNudges(benchmark::State& state) {
  std::mt19937_64 gen(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<NudgeEvent> nudges;
  std::vector<SpeakRequest> requests;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string pid = "p" + std::to_string(gen() % 200);
    const std::string room = "R" + std::to_string(gen() % 20);
    nudges.push_back({"n" + std::to_string(i), pid, room, Millis(static_cast<long long>(gen() % 3'600'000)),
                      gen() % 6 ? NudgeArm::kSent : NudgeArm::kSkipped, NudgeKind::kGeneral, 1});
    requests.push_back({pid, room, Millis(static_cast<long long>(gen() % 3'600'000)), std::nullopt});
  }
  for (auto _ : state) benchmark::DoNotOptimize(link_nudges(nudges, requests));
}
BENCHMARK(BM_LinkNudges)->Arg(1'000)->Arg(30'000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
