#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "htsm/types.hpp"

namespace htsm {

/// Priority record of one cached unit. Ordering is lexicographic ascending
/// (iqn, rqn, seq): the heap minimum is the eviction candidate. seq is the
/// insertion sequence number and never changes on updates, so equals evict
/// oldest-first.
struct GsgEntry {
  DataUnitKey key;
  std::uint32_t iqn = 0;  // queries whose request window holds the unit
  std::uint32_t rqn = 0;  // registered queries still needing the unit
  std::uint64_t seq = 0;
};

/// Global Status Graph: an indexed binary min-heap over cached units. All
/// mutations keep the heap property and the key→slot index consistent.
class Gsg {
 public:
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  bool contains(const DataUnitKey& key) const { return pos_.count(key) > 0; }

  void insert(const DataUnitKey& key, std::uint32_t iqn, std::uint32_t rqn);

  /// Replaces the entry's counts and restores heap order. Unknown key → Error.
  void update(const DataUnitKey& key, std::uint32_t iqn, std::uint32_t rqn);

  void erase(const DataUnitKey& key);

  const GsgEntry& peek_min() const;

  /// Returns and removes the minimal entry. Empty graph → Error.
  GsgEntry pop_min();

  const GsgEntry& get(const DataUnitKey& key) const;

  /// Snapshot in heap-array order; for oracles and diagnostics.
  const std::vector<GsgEntry>& raw_entries() const { return heap_; }

 private:
  static bool less(const GsgEntry& a, const GsgEntry& b);
  void sift_up(std::size_t i);
  void sift_down(std::size_t i);
  void swap_slots(std::size_t a, std::size_t b);

  std::vector<GsgEntry> heap_;
  std::unordered_map<DataUnitKey, std::size_t, DataUnitKeyHash> pos_;
  std::uint64_t next_seq_ = 0;
};

struct CacheStats {
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
};

/// hits/lookups, 0 when no lookups were made.
inline double hit_ratio(const CacheStats& s) {
  return s.lookups == 0 ? 0.0
                        : static_cast<double>(s.hits) /
                              static_cast<double>(s.lookups);
}

struct CacheUnit {
  DataUnitKey key;
  std::vector<std::uint8_t> payload;
};

enum class CachePolicy { Wpc, Lru };

enum class PutOutcome { Cached, Updated, Dropped, OverCapacity };

/// The unit store under either reference-aware (GSG) or recency eviction.
/// Single-writer: the scheduler stage owns all mutation.
class UnitCache {
 public:
  UnitCache(CachePolicy policy, std::uint64_t capacity_bytes);

  /// Counts a lookup; on hit returns the payload without removal and, under
  /// LRU, freshens the unit's recency.
  std::optional<std::span<const std::uint8_t>> lookup(const DataUnitKey& key);

  /// Offers a freshly read unit. iqn/rqn are the unit's reference counts
  /// after the delivery that produced it; rqn == 0 drops the unit outright.
  /// Inserting past capacity evicts minimal-priority units until it fits.
  PutOutcome put(CacheUnit unit, std::uint32_t iqn, std::uint32_t rqn);

  /// Applies signed count deltas to a cached unit, re-sifting its heap slot.
  /// rqn hitting 0 removes unit and entry immediately. Underflow → Error.
  std::pair<std::uint32_t, std::uint32_t> update_counts(
      const DataUnitKey& key, std::int32_t delta_iqn, std::int32_t delta_rqn);

  /// Removes and returns the eviction candidate (heap minimum under WPC,
  /// least recent under LRU). Empty cache → Error.
  DataUnitKey evict_one();

  bool contains(const DataUnitKey& key) const;
  std::uint64_t bytes_cached() const { return bytes_; }
  std::size_t unit_count() const { return units_.size(); }
  std::uint64_t capacity() const { return capacity_; }
  CachePolicy policy() const { return policy_; }
  const CacheStats& stats() const { return stats_; }
  const Gsg& gsg() const { return gsg_; }

 private:
  struct Resident {
    std::vector<std::uint8_t> payload;
    std::list<DataUnitKey>::iterator lru_slot;  // LRU only
  };

  void remove_unit(const DataUnitKey& key);

  CachePolicy policy_;
  std::uint64_t capacity_;
  std::uint64_t bytes_ = 0;
  std::unordered_map<DataUnitKey, Resident, DataUnitKeyHash> units_;
  Gsg gsg_;
  std::list<DataUnitKey> lru_;  // front = most recent
  CacheStats stats_;
};

/// Reference bookkeeping for keys that are not (or not yet) cached, so the
/// put decision is answerable before first caching. The scheduler owns one
/// table per run and mirrors changes into the cache for resident keys.
class RefCountTable {
 public:
  struct Counts {
    std::uint32_t iqn = 0;
    std::uint32_t rqn = 0;
  };

  void add_interest(const DataUnitKey& key);   // registration: rqn += 1
  void window_enter(const DataUnitKey& key);   // admission: iqn += 1
  Counts on_delivered(const DataUnitKey& key); // iqn -= 1, rqn -= 1
  Counts get(const DataUnitKey& key) const;

 private:
  std::unordered_map<DataUnitKey, Counts, DataUnitKeyHash> counts_;
};

}  // namespace htsm
