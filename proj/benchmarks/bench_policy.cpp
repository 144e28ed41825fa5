#include <benchmark/benchmark.h>

#include <cstdio>
#include <filesystem>

#include "htsm/bench.hpp"

using namespace htsm;

namespace {

/// One shared desk-scale table for the end-to-end runs.
struct PolicyFixture {
  std::filesystem::path path;
  GeneratedTable table;

  PolicyFixture()
      : path(std::filesystem::temp_directory_path() /
             ("htsm_bench_" + std::to_string(::getpid()) + ".htsm")),
        table(generate_table(1234, 50000, ChunkingConfig{2048, 4096}, path)) {}
  ~PolicyFixture() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

PolicyFixture& fixture() {
  static PolicyFixture fx;
  return fx;
}

}  // namespace

static void BM_RunPolicy(benchmark::State& state) {
  PolicyFixture& fx = fixture();
  BenchConfig cfg;
  cfg.table_path = fx.path;
  cfg.mode = static_cast<PolicyMode>(state.range(0));
  cfg.window = static_cast<std::uint32_t>(state.range(1));
  cfg.cache_fraction = 0.2;

  const auto texts = generate_workload(9, 16, fx.table.meta);
  std::uint64_t requests = 0;
  for (auto _ : state) {
    BatchOutcome out = run_batch(fx.table.meta, cfg, texts);
    requests = out.metrics.io.request_count;
    benchmark::DoNotOptimize(out);
  }
  state.counters["io_requests"] = static_cast<double>(requests);
}
BENCHMARK(BM_RunPolicy)
    ->Args({static_cast<long>(PolicyMode::Lru), 1})
    ->Args({static_cast<long>(PolicyMode::Cs), 1})
    ->Args({static_cast<long>(PolicyMode::HighTh), 5})
    ->Args({static_cast<long>(PolicyMode::HighTh), 30})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
