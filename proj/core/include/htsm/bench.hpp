#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "htsm/catalog.hpp"
#include "htsm/engine.hpp"
#include "htsm/scheduler.hpp"

namespace htsm {

enum class DeviceBackend : std::uint8_t { Hdd, Ssd, File };

const char* device_backend_name(DeviceBackend b);
DeviceBackend parse_device_backend(const std::string& name);

struct BenchConfig {
  std::uint64_t seed = 42;
  std::uint64_t scale = 100000;  // tuples
  std::uint32_t batches = 3;
  std::uint32_t queries_per_batch = 16;
  PolicyMode mode = PolicyMode::HighTh;
  std::uint32_t window = 30;
  double cache_fraction = 0.2;  // <= 0 means unlimited
  DeviceBackend device = DeviceBackend::Hdd;
  std::uint64_t tuples_per_chunk = 4096;
  std::uint64_t page_bytes = 4096;
  std::uint32_t devices = 1;
  double cpu_cost_per_tuple = 0.0;
  std::filesystem::path table_path;
};

/// The 16-column lineitem-like layout: 6 int64, 6 float64, 2 date32, 2 str16.
TableSchema lineitem_schema(std::uint64_t tuple_count);

/// Deterministic synthetic data; column c draws from stream mix(seed, c).
/// Identical (seed, scale) produce identical values.
TableData generate_rows(std::uint64_t seed, std::uint64_t scale,
                        const TableSchema& schema);

struct GeneratedTable {
  TableMeta meta;
  TableData data;  // in-memory oracle copy
};

/// Generates and writes a table file; bit-identical per (seed, scale, config).
GeneratedTable generate_table(std::uint64_t seed, std::uint64_t scale,
                              const ChunkingConfig& config,
                              const std::filesystem::path& path);

/// Q queries of the benchmark family over the table's numeric columns, with
/// filter thresholds drawn from a clipped normal over each column's range.
std::vector<std::string> generate_workload(std::uint64_t seed, std::uint32_t q,
                                           const TableMeta& meta);

struct BatchOutcome {
  RunMetrics metrics;
  std::vector<QueryResult> results;         // by query position in batch
  std::vector<std::string> query_texts;
  double wall_seconds = 0.0;                // file backend only
};

struct ExperimentOutcome {
  std::vector<BatchOutcome> batches;
  nlohmann::ordered_json to_metrics_json(const BenchConfig& config) const;
};

/// Runs B batches of Q queries through the chosen policy against the stored
/// table. Deterministic for sim backends.
ExperimentOutcome run_experiment(const BenchConfig& config,
                                 const TableMeta& meta);

/// Convenience: run a policy over already-planned queries; used by fixtures
/// and the sweep driver.
BatchOutcome run_batch(const TableMeta& meta, const BenchConfig& config,
                       const std::vector<std::string>& query_texts);

/// Cross-product sweep described by a JSON grid document; emits one metrics
/// file per cell plus summary.csv. Cell failures are recorded and skipped.
void run_sweep(const std::filesystem::path& grid_path,
               const std::filesystem::path& out_dir);

/// Renders metrics files into plot-ready tables (text or CSV).
std::string render_report(const std::vector<std::filesystem::path>& inputs,
                          const std::string& format);

nlohmann::ordered_json load_metrics_file(const std::filesystem::path& path);

}  // namespace htsm
