#include "htsm/cache.hpp"

#include <tuple>

namespace htsm {

bool Gsg::less(const GsgEntry& a, const GsgEntry& b) {
  return std::tie(a.iqn, a.rqn, a.seq) < std::tie(b.iqn, b.rqn, b.seq);
}

void Gsg::swap_slots(std::size_t a, std::size_t b) {
  std::swap(heap_[a], heap_[b]);
  pos_[heap_[a].key] = a;
  pos_[heap_[b].key] = b;
}

void Gsg::sift_up(std::size_t i) {
  while (i > 0) {
    const std::size_t parent = (i - 1) / 2;
    if (!less(heap_[i], heap_[parent])) break;
    swap_slots(i, parent);
    i = parent;
  }
}

void Gsg::sift_down(std::size_t i) {
  const std::size_t n = heap_.size();
  for (;;) {
    std::size_t smallest = i;
    const std::size_t l = 2 * i + 1;
    const std::size_t r = 2 * i + 2;
    if (l < n && less(heap_[l], heap_[smallest])) smallest = l;
    if (r < n && less(heap_[r], heap_[smallest])) smallest = r;
    if (smallest == i) break;
    swap_slots(i, smallest);
    i = smallest;
  }
}

void Gsg::insert(const DataUnitKey& key, std::uint32_t iqn,
                 std::uint32_t rqn) {
  if (pos_.count(key)) throw Error("GSG insert: key already present");
  if (rqn == 0) throw Error("GSG never stores entries with rqn = 0");
  if (rqn < iqn) throw Error("GSG entry would violate rqn >= iqn");
  heap_.push_back(GsgEntry{key, iqn, rqn, next_seq_++});
  pos_[key] = heap_.size() - 1;
  sift_up(heap_.size() - 1);
}

void Gsg::update(const DataUnitKey& key, std::uint32_t iqn,
                 std::uint32_t rqn) {
  auto it = pos_.find(key);
  if (it == pos_.end()) throw Error("GSG update: unknown key");
  if (rqn < iqn) throw Error("GSG entry would violate rqn >= iqn");
  const std::size_t i = it->second;
  heap_[i].iqn = iqn;
  heap_[i].rqn = rqn;
  sift_up(i);
  sift_down(pos_[key]);
}

void Gsg::erase(const DataUnitKey& key) {
  auto it = pos_.find(key);
  if (it == pos_.end()) throw Error("GSG erase: unknown key");
  const std::size_t i = it->second;
  const std::size_t last = heap_.size() - 1;
  if (i != last) swap_slots(i, last);
  pos_.erase(heap_.back().key);
  heap_.pop_back();
  if (i < heap_.size()) {
    sift_up(i);
    sift_down(i);
  }
}

const GsgEntry& Gsg::peek_min() const {
  if (heap_.empty()) throw Error("GSG is empty: no eviction candidate");
  return heap_.front();
}

GsgEntry Gsg::pop_min() {
  GsgEntry out = peek_min();
  erase(out.key);
  return out;
}

const GsgEntry& Gsg::get(const DataUnitKey& key) const {
  auto it = pos_.find(key);
  if (it == pos_.end()) throw Error("GSG get: unknown key");
  return heap_[it->second];
}

UnitCache::UnitCache(CachePolicy policy, std::uint64_t capacity_bytes)
    : policy_(policy), capacity_(capacity_bytes) {}

std::optional<std::span<const std::uint8_t>> UnitCache::lookup(
    const DataUnitKey& key) {
  stats_.lookups += 1;
  auto it = units_.find(key);
  if (it == units_.end()) return std::nullopt;
  stats_.hits += 1;
  if (policy_ == CachePolicy::Lru)
    lru_.splice(lru_.begin(), lru_, it->second.lru_slot);
  return std::span<const std::uint8_t>(it->second.payload);
}

bool UnitCache::contains(const DataUnitKey& key) const {
  return units_.count(key) > 0;
}

void UnitCache::remove_unit(const DataUnitKey& key) {
  auto it = units_.find(key);
  if (it == units_.end()) throw Error("cache remove: unknown key");
  bytes_ -= it->second.payload.size();
  if (policy_ == CachePolicy::Lru)
    lru_.erase(it->second.lru_slot);
  else if (gsg_.contains(key))
    gsg_.erase(key);
  units_.erase(it);
}

DataUnitKey UnitCache::evict_one() {
  if (units_.empty()) throw Error("evict on empty cache");
  DataUnitKey victim;
  if (policy_ == CachePolicy::Wpc) {
    victim = gsg_.pop_min().key;
    auto it = units_.find(victim);
    bytes_ -= it->second.payload.size();
    units_.erase(it);
  } else {
    victim = lru_.back();
    remove_unit(victim);
  }
  return victim;
}

PutOutcome UnitCache::put(CacheUnit unit, std::uint32_t iqn,
                          std::uint32_t rqn) {
  if (unit.payload.empty()) throw Error("cache unit payload is empty");
  if (policy_ == CachePolicy::Wpc && rqn == 0) return PutOutcome::Dropped;

  if (auto it = units_.find(unit.key); it != units_.end()) {
    if (policy_ == CachePolicy::Wpc) gsg_.update(unit.key, iqn, rqn);
    else lru_.splice(lru_.begin(), lru_, it->second.lru_slot);
    return PutOutcome::Updated;
  }

  if (unit.payload.size() > capacity_) return PutOutcome::OverCapacity;

  const DataUnitKey key = unit.key;
  Resident res;
  bytes_ += unit.payload.size();
  res.payload = std::move(unit.payload);
  if (policy_ == CachePolicy::Lru) {
    lru_.push_front(key);
    res.lru_slot = lru_.begin();
  } else {
    gsg_.insert(key, iqn, rqn);
  }
  units_.emplace(key, std::move(res));

  while (bytes_ > capacity_) evict_one();
  return PutOutcome::Cached;
}

std::pair<std::uint32_t, std::uint32_t> UnitCache::update_counts(
    const DataUnitKey& key, std::int32_t delta_iqn, std::int32_t delta_rqn) {
  if (policy_ != CachePolicy::Wpc)
    throw Error("update_counts is a WPC operation");
  const GsgEntry& entry = gsg_.get(key);
  const std::int64_t iqn = std::int64_t(entry.iqn) + delta_iqn;
  const std::int64_t rqn = std::int64_t(entry.rqn) + delta_rqn;
  if (iqn < 0 || rqn < 0)
    throw Error("reference count underflow: scheduler bookkeeping bug");
  if (rqn == 0) {
    remove_unit(key);
    return {0, 0};
  }
  gsg_.update(key, static_cast<std::uint32_t>(iqn),
              static_cast<std::uint32_t>(rqn));
  return {static_cast<std::uint32_t>(iqn), static_cast<std::uint32_t>(rqn)};
}

void RefCountTable::add_interest(const DataUnitKey& key) {
  counts_[key].rqn += 1;
}

void RefCountTable::window_enter(const DataUnitKey& key) {
  auto it = counts_.find(key);
  if (it == counts_.end())
    throw Error("window admission for unregistered key");
  it->second.iqn += 1;
  if (it->second.iqn > it->second.rqn)
    throw Error("iqn exceeded rqn: window bookkeeping bug");
}

RefCountTable::Counts RefCountTable::on_delivered(const DataUnitKey& key) {
  auto it = counts_.find(key);
  if (it == counts_.end() || it->second.iqn == 0 || it->second.rqn == 0)
    throw Error("reference count underflow: scheduler bookkeeping bug");
  it->second.iqn -= 1;
  it->second.rqn -= 1;
  const Counts out = it->second;
  if (out.rqn == 0) counts_.erase(it);
  return out;
}

RefCountTable::Counts RefCountTable::get(const DataUnitKey& key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? Counts{} : it->second;
}

}  // namespace htsm
