#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htsm/types.hpp"

namespace htsm {

struct ColumnSpec {
  std::string name;
  ColumnType type;
};

/// Ordered column set plus row count. Column names must be unique and the
/// column count must stay within [1, 256].
struct TableSchema {
  std::vector<ColumnSpec> columns;
  std::uint64_t tuple_count = 0;

  std::size_t column_count() const { return columns.size(); }

  /// Index of a named column; throws on unknown names.
  ColumnId column_index(std::string_view name) const;
  bool has_column(std::string_view name) const;

  void validate() const;
};

/// Storage knobs: chunk size in tuples, page size in bytes. The page is the
/// I/O granularity and segment alignment unit; it must be a power of two in
/// [2^12, 2^26].
struct ChunkingConfig {
  std::uint64_t tuples_per_chunk = 65536;
  std::uint64_t page_bytes = std::uint64_t(1) << 22;

  void validate() const;
};

/// Number of chunks covering N tuples at n tuples per chunk: ceil(N/n).
/// N = 0 yields zero chunks; n = 0 is rejected.
std::uint64_t chunk_count(std::uint64_t tuple_count,
                          std::uint64_t tuples_per_chunk);

/// Tuples held by one chunk (the last chunk may be short).
std::uint64_t chunk_tuple_count(std::uint64_t tuple_count,
                                std::uint64_t tuples_per_chunk,
                                ChunkId chunk_id);

}  // namespace htsm
