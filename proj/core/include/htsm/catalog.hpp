#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "htsm/column_data.hpp"
#include "htsm/schema.hpp"
#include "htsm/types.hpp"

namespace htsm {

/// Byte range on the storage file. Offsets are absolute and page-aligned;
/// directory extents are whole pages (the I/O granularity), the true data
/// length of a unit lives in DirectoryEntry::uncompressed_bytes.
struct Extent {
  std::uint32_t device_id = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Encoded min/max statistics for one data unit. Bounds are stored in the
/// 16-byte on-disk encoding; numeric columns additionally carry the decoded
/// values used for pruning.
struct ZoneMap {
  std::array<std::uint8_t, 16> min_encoded{};
  std::array<std::uint8_t, 16> max_encoded{};
  double min_value = 0.0;  // numeric columns only
  double max_value = 0.0;
};

struct DirectoryEntry {
  std::vector<Extent> extents;  // page-granular, ascending, contiguous
  ZoneMap zone;
  std::uint64_t uncompressed_bytes = 0;
};

/// Maps every (chunk, column) key of a table to its storage location and
/// statistics. Immutable after write_table; safe for concurrent readers.
class ChunkDirectory {
 public:
  void add(const DataUnitKey& key, DirectoryEntry entry);
  bool contains(const DataUnitKey& key) const;
  const DirectoryEntry& at(const DataUnitKey& key) const;
  std::size_t size() const { return entries_.size(); }

  /// Deterministic (chunk, column) ascending iteration.
  const std::map<DataUnitKey, DirectoryEntry>& entries() const {
    return entries_;
  }

 private:
  std::map<DataUnitKey, DirectoryEntry> entries_;
};

/// Everything needed to address a stored table.
struct TableMeta {
  TableSchema schema;
  ChunkingConfig config;
  ChunkDirectory directory;

  std::uint64_t chunks() const {
    return chunk_count(schema.tuple_count, config.tuples_per_chunk);
  }
  std::uint64_t tuples_in_chunk(ChunkId c) const {
    return chunk_tuple_count(schema.tuple_count, config.tuples_per_chunk, c);
  }
  /// Sum of uncompressed unit sizes; the base for cache-fraction capacity.
  std::uint64_t total_data_bytes() const;
};

enum class FilterOp : std::uint8_t { Ge, Lt };

/// One-sided predicate on a single column, the only filter shape the scan
/// planner understands.
struct ScanFilter {
  ColumnId column = 0;
  FilterOp op = FilterOp::Ge;
  double value = 0.0;
};

/// Writes the table in the on-disk format and returns its directory.
/// Column data must match the schema's types and tuple count exactly.
TableMeta write_table(const TableSchema& schema, const ChunkingConfig& config,
                      const TableData& data,
                      const std::filesystem::path& path);

/// Parses the header of a stored table.
TableMeta open_table(const std::filesystem::path& path);

/// Page extents of one unit, exactly as stored. Unknown key → Error.
const std::vector<Extent>& lookup_extents(const ChunkDirectory& dir,
                                          const DataUnitKey& key);

/// Ascending chunk ids whose zone map interval can intersect the predicate;
/// no filter keeps every chunk. Filter column must exist and be numeric.
std::vector<ChunkId> prune_chunks(const TableMeta& meta,
                                  const std::optional<ScanFilter>& filter);

/// Zone-map bound encoding (16 bytes, little-endian, zero-padded).
std::array<std::uint8_t, 16> encode_bound(ColumnType type, double numeric,
                                          const Str16* str);

std::uint64_t align_up(std::uint64_t v, std::uint64_t alignment);

}  // namespace htsm
