#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htsm/catalog.hpp"
#include "htsm/column_data.hpp"
#include "htsm/types.hpp"

namespace htsm {

enum class AggFunc : std::uint8_t { Sum, Avg };

/// Aggregate input: a single column, or the discounted-price product
/// a * (1 - b) * (1 + c).
struct AggExpr {
  enum class Kind : std::uint8_t { Column, Product } kind = Kind::Column;
  std::string col_a;
  std::string col_b;
  std::string col_c;
};

struct QueryFilter {
  std::string column;
  FilterOp op = FilterOp::Ge;
  double value = 0.0;
};

/// One query of the supported family:
///   SELECT <SUM|AVG>(<expr>) FROM <table> [WHERE <col> <op> <literal>]
struct Query {
  AggFunc agg = AggFunc::Sum;
  AggExpr expr;
  std::string table;
  std::optional<QueryFilter> filter;
};

Query parse_query(const std::string& text);

/// Resolved access plan: exactly the referenced columns, zone-map pruned
/// chunks in ascending order, and the request window bound.
struct QueryPlan {
  std::vector<ColumnId> required_columns;  // sorted unique
  std::vector<ChunkId> pruned_chunks;      // ascending
  std::uint32_t window_size = 1;
  // resolved ids for evaluation
  ColumnId expr_a = 0, expr_b = 0, expr_c = 0;
  bool expr_is_product = false;
  std::optional<ScanFilter> filter;
  AggFunc agg = AggFunc::Sum;
};

QueryPlan plan(const Query& query, const TableMeta& meta,
               std::uint32_t window_size);

/// Fold accumulator. Partials are kept per chunk and combined in ascending
/// chunk order at finalize so that results do not depend on delivery order.
struct AggState {
  struct Partial {
    double sum = 0.0;
    std::uint64_t count = 0;
  };
  std::map<ChunkId, Partial> partials;
};

/// Raw little-endian column segments of one chunk, as delivered.
struct ChunkColumns {
  ChunkId chunk_id = 0;
  std::uint64_t tuple_count = 0;
  std::vector<std::pair<ColumnId, std::span<const std::uint8_t>>> columns;

  std::span<const std::uint8_t> column(ColumnId id) const;
};

/// Accumulates one delivered chunk into the state. The payload must carry
/// every column the plan requires.
void fold_chunk(AggState& state, const ChunkColumns& chunk,
                const QueryPlan& plan, const TableSchema& schema);

struct QueryResult {
  std::optional<double> value;  // empty marker: AVG over zero rows
  std::uint64_t matching_rows = 0;

  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

QueryResult finalize(const AggState& state, AggFunc agg);

/// Independent reference computation straight over the generator's arrays,
/// bypassing catalog, scheduler and cache. Accumulation order matches the
/// engine's (ascending chunk, ascending row) so equality is bit-exact.
QueryResult oracle_scan(const Query& query, const TableSchema& schema,
                        const TableData& data,
                        std::uint64_t tuples_per_chunk);

}  // namespace htsm
