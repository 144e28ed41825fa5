#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "htsm/cache.hpp"
#include "htsm/catalog.hpp"
#include "htsm/device.hpp"
#include "htsm/engine.hpp"
#include "htsm/types.hpp"

namespace htsm {

enum class PolicyMode : std::uint8_t { Lru, Cs, HighTh };

const char* policy_mode_name(PolicyMode mode);
PolicyMode parse_policy_mode(const std::string& name);

/// Pending read of one chunk: the union of needed columns and the queries
/// waiting on it.
struct ChunkRequest {
  ChunkId chunk_id = 0;
  std::vector<ColumnId> columns;  // sorted unique, nonempty
  std::vector<QueryId> queries;   // sorted unique, nonempty
};

/// The shared, front-consumed request list. With merging enabled it holds at
/// most one entry per chunk id and merges by set union in place, keeping
/// existing positions stable (the append-or-merge rule).
class RequestList {
 public:
  explicit RequestList(bool merge_enabled) : merge_(merge_enabled) {}

  void insert_request(ChunkRequest request);
  ChunkRequest pop_front();
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::list<ChunkRequest>& entries() const { return entries_; }
  bool merge_enabled() const { return merge_; }

 private:
  bool merge_;
  std::list<ChunkRequest> entries_;
  std::unordered_map<ChunkId, std::list<ChunkRequest>::iterator> index_;
};

/// Per-query scan state: pruned chunk order, window bound and cursor.
struct QueryRegistration {
  QueryId query_id = 0;
  std::vector<ColumnId> required_columns;
  std::vector<ChunkId> chunk_order;
  std::uint32_t window_size = 1;
  std::size_t cursor = 0;          // next chunk_order index to admit
  std::size_t delivered = 0;
  bool complete = false;
};

/// Where read bytes come from and how request costs accrue.
struct RunDeviceConfig {
  DeviceProfile profile = DeviceProfile::hdd();
  std::uint32_t device_count = 1;
  bool file_backed = true;  // false: zero-filled payloads (cost model only)
  std::filesystem::path table_path;
};

struct RunConfig {
  PolicyMode mode = PolicyMode::HighTh;
  std::uint64_t cache_capacity_bytes = UINT64_MAX;
  RunDeviceConfig device;
  double cpu_cost_per_tuple = 0.0;  // seconds, charged per delivered tuple
};

/// A query's fold sink; one per registered query, driven at delivery time.
class DeliverySink {
 public:
  virtual ~DeliverySink() = default;
  virtual void on_chunk(QueryId query, const ChunkColumns& columns) = 0;
};

struct QueryCompletion {
  QueryId query_id = 0;
  std::uint64_t completion_index = 0;
  double sim_time = 0.0;
};

struct RunMetrics {
  std::vector<QueryCompletion> completions;
  IoStats io;
  CacheStats cache;                 // probe-level lookups/hits
  std::uint64_t shared_hits = 0;    // co-deliveries riding a single read
  double sim_time_total = 0.0;
  std::uint64_t chunks_delivered = 0;

  /// (cache hits + merged co-delivery hits) / cache probes. Merging means a
  /// probe can serve several queries, so sharing-heavy runs may exceed 1.
  double effective_hit_ratio() const {
    if (cache.lookups == 0) return 0.0;
    return static_cast<double>(cache.hits + shared_hits) /
           static_cast<double>(cache.lookups);
  }
};

/// The scan control plane: registrations, request windows, the shared
/// request list, cache interplay and delivery fan-out. All state mutates on
/// the caller's thread; run() drives events on one deterministic loop in
/// pop order.
class Scheduler {
 public:
  Scheduler(const TableMeta& meta, RunConfig config, DeliverySink& sink);
  ~Scheduler();

  /// Registers a query: bumps rqn for every planned key and admits the
  /// first min(W, chunks) window entries. CS and LRU modes force W = 1.
  /// Duplicate id or unsorted chunk order → Error.
  void register_query(QueryId id, const QueryPlan& plan);

  /// Pops the front request, strips cache-resident columns, performs the
  /// read, fans deliveries out and advances windows. Returns false when the
  /// list is drained.
  bool step();

  /// Runs to quiescence and verifies delivery and conservation invariants.
  RunMetrics run();

  bool idle() const { return rlist_.empty(); }
  const RequestList& request_list() const { return rlist_; }
  const UnitCache& cache() const { return cache_; }
  const RefCountTable& refcounts() const { return refs_; }

  /// Total rqn decrements applied per key; equals the number of registered
  /// queries requiring the key once the run drains (the conservation law).
  const std::unordered_map<DataUnitKey, std::uint64_t, DataUnitKeyHash>&
  applied_decrements() const {
    return decrements_;
  }

 private:
  struct UnitBuffer;  // assembled unit payloads of one chunk event

  void admit_next(QueryRegistration& reg);
  void deliver(const ChunkRequest& request,
               const std::vector<std::pair<ColumnId, std::vector<std::uint8_t>>>&
                   unit_payloads,
               const std::vector<ColumnId>& fresh_columns);
  void complete_query(QueryRegistration& reg);

  const TableMeta& meta_;
  RunConfig config_;
  DeliverySink& sink_;
  RequestList rlist_;
  UnitCache cache_;
  RefCountTable refs_;
  std::unique_ptr<DeviceArray> device_;
  std::unordered_map<QueryId, QueryRegistration> registrations_;
  std::vector<QueryId> registration_order_;
  std::unordered_map<DataUnitKey, std::uint64_t, DataUnitKeyHash> decrements_;
  std::unordered_map<DataUnitKey, std::uint64_t, DataUnitKeyHash> expected_;
  std::vector<QueryCompletion> completions_;
  std::uint64_t shared_hits_ = 0;
  std::uint64_t chunks_delivered_ = 0;
  double sim_now_ = 0.0;
};

}  // namespace htsm
