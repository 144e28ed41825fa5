#include <benchmark/benchmark.h>

#include <random>

#include "htsm/cache.hpp"

using namespace htsm;

static void BM_GsgInsertPop(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  std::mt19937_64 gen(1);
  for (auto _ : state) {
    Gsg gsg;
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto iqn = static_cast<std::uint32_t>(gen() % 8);
      gsg.insert(DataUnitKey{i, 0}, iqn, iqn + 1);
    }
    while (!gsg.empty()) benchmark::DoNotOptimize(gsg.pop_min());
  }
  state.SetItemsProcessed(state.iterations() * n * 2);
}
BENCHMARK(BM_GsgInsertPop)->Range(1 << 8, 1 << 14);

static void BM_GsgUpdate(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  Gsg gsg;
  std::mt19937_64 gen(2);
  for (std::uint32_t i = 0; i < n; ++i)
    gsg.insert(DataUnitKey{i, 0}, static_cast<std::uint32_t>(gen() % 8),
               8 + static_cast<std::uint32_t>(gen() % 8));
  for (auto _ : state) {
    const DataUnitKey key{static_cast<ChunkId>(gen() % n), 0};
    const auto iqn = static_cast<std::uint32_t>(gen() % 8);
    gsg.update(key, iqn, iqn + 1 + static_cast<std::uint32_t>(gen() % 8));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GsgUpdate)->Range(1 << 8, 1 << 14);

static void BM_CachePutEvict(benchmark::State& state) {
  std::mt19937_64 gen(3);
  UnitCache cache(CachePolicy::Wpc, 1 << 16);
  std::uint32_t i = 0;
  for (auto _ : state) {
    const auto iqn = static_cast<std::uint32_t>(gen() % 4);
    cache.put(CacheUnit{DataUnitKey{i++, 0},
                        std::vector<std::uint8_t>(1024, 0x5A)},
              iqn, iqn + 1);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CachePutEvict);
