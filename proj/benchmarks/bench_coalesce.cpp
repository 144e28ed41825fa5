#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "htsm/device.hpp"

using namespace htsm;

static std::vector<IoRequest> random_pages(std::size_t n, double density,
                                           std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const auto slots = static_cast<std::uint64_t>(n / density);
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint64_t> all(slots);
  for (std::uint64_t i = 0; i < slots; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), gen);
  offsets.assign(all.begin(), all.begin() + static_cast<long>(n));
  std::sort(offsets.begin(), offsets.end());

  std::vector<IoRequest> reqs;
  for (auto o : offsets) {
    IoRequest r;
    r.offset = o * 4096;
    r.length = 4096;
    reqs.push_back(r);
  }
  return reqs;
}

static void BM_Coalesce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const double density = static_cast<double>(state.range(1)) / 100.0;
  const auto reqs = random_pages(n, density, 7);
  for (auto _ : state) benchmark::DoNotOptimize(coalesce(reqs));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Coalesce)
    ->Args({1024, 90})
    ->Args({1024, 50})
    ->Args({1024, 10})
    ->Args({16384, 50});

static void BM_Dispatch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto devices = static_cast<std::uint32_t>(state.range(1));
  std::vector<Extent> extents;
  for (std::size_t i = 0; i < n; ++i)
    extents.push_back(Extent{0, i * 4096, 4096});
  for (auto _ : state)
    benchmark::DoNotOptimize(dispatch(extents, devices));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Dispatch)->Args({4096, 1})->Args({4096, 4})->Args({4096, 8});
