#include "htsm/scheduler.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace htsm {

const char* policy_mode_name(PolicyMode mode) {
  switch (mode) {
    case PolicyMode::Lru: return "lru";
    case PolicyMode::Cs: return "cs";
    case PolicyMode::HighTh: return "highth";
  }
  return "?";
}

PolicyMode parse_policy_mode(const std::string& name) {
  if (name == "lru") return PolicyMode::Lru;
  if (name == "cs") return PolicyMode::Cs;
  if (name == "highth") return PolicyMode::HighTh;
  throw Error("unknown policy mode: " + name);
}

void RequestList::insert_request(ChunkRequest request) {
  if (request.columns.empty() || request.queries.empty())
    throw Error("chunk request must carry columns and queries");
  if (merge_) {
    if (auto it = index_.find(request.chunk_id); it != index_.end()) {
      // Merge branch: union in place, position unchanged.
      ChunkRequest& existing = *it->second;
      for (ColumnId c : request.columns) {
        auto at = std::lower_bound(existing.columns.begin(),
                                   existing.columns.end(), c);
        if (at == existing.columns.end() || *at != c)
          existing.columns.insert(at, c);
      }
      for (QueryId q : request.queries) {
        auto at = std::lower_bound(existing.queries.begin(),
                                   existing.queries.end(), q);
        if (at == existing.queries.end() || *at != q)
          existing.queries.insert(at, q);
      }
      return;
    }
    entries_.push_back(std::move(request));
    index_.emplace(entries_.back().chunk_id, std::prev(entries_.end()));
    return;
  }
  entries_.push_back(std::move(request));
}

ChunkRequest RequestList::pop_front() {
  if (entries_.empty()) throw Error("request list is empty");
  ChunkRequest out = std::move(entries_.front());
  entries_.pop_front();
  if (merge_) index_.erase(out.chunk_id);
  return out;
}

Scheduler::Scheduler(const TableMeta& meta, RunConfig config,
                     DeliverySink& sink)
    : meta_(meta),
      config_(config),
      sink_(sink),
      rlist_(config.mode == PolicyMode::HighTh),
      cache_(config.mode == PolicyMode::Lru ? CachePolicy::Lru
                                            : CachePolicy::Wpc,
             config.cache_capacity_bytes) {
  device_ = std::make_unique<DeviceArray>(config_.device.profile,
                                          config_.device.device_count);
  if (config_.device.file_backed) {
    if (config_.device.table_path.empty())
      throw Error("file-backed run needs a table path");
    device_->attach_file(config_.device.table_path);
  }
}

Scheduler::~Scheduler() = default;

void Scheduler::register_query(QueryId id, const QueryPlan& plan) {
  if (registrations_.count(id))
    throw Error("duplicate query id " + std::to_string(id));
  if (!std::is_sorted(plan.pruned_chunks.begin(), plan.pruned_chunks.end()) ||
      std::adjacent_find(plan.pruned_chunks.begin(),
                         plan.pruned_chunks.end()) != plan.pruned_chunks.end())
    throw Error("chunk order must be strictly ascending");
  if (plan.required_columns.empty())
    throw Error("query requires at least one column");

  QueryRegistration reg;
  reg.query_id = id;
  reg.required_columns = plan.required_columns;
  reg.chunk_order = plan.pruned_chunks;
  // The CS baseline is a pull model: its window is always one chunk deep.
  reg.window_size =
      config_.mode == PolicyMode::HighTh ? plan.window_size : 1;

  for (ChunkId c : reg.chunk_order)
    for (ColumnId col : reg.required_columns) {
      const DataUnitKey key{c, col};
      refs_.add_interest(key);
      expected_[key] += 1;
    }

  registration_order_.push_back(id);
  auto& stored = registrations_[id] = std::move(reg);

  if (stored.chunk_order.empty()) {
    complete_query(stored);
    return;
  }
  const std::size_t admit =
      std::min<std::size_t>(stored.window_size, stored.chunk_order.size());
  for (std::size_t i = 0; i < admit; ++i) admit_next(stored);
}

void Scheduler::admit_next(QueryRegistration& reg) {
  assert(reg.cursor < reg.chunk_order.size());
  const ChunkId chunk = reg.chunk_order[reg.cursor++];
  if (reg.cursor - reg.delivered > reg.window_size)
    throw Error("window bound exceeded: query " +
                std::to_string(reg.query_id));
  for (ColumnId col : reg.required_columns) {
    const DataUnitKey key{chunk, col};
    refs_.window_enter(key);
    if (cache_.policy() == CachePolicy::Wpc && cache_.contains(key))
      cache_.update_counts(key, +1, 0);
  }
  rlist_.insert_request(
      ChunkRequest{chunk, reg.required_columns, {reg.query_id}});
}

void Scheduler::complete_query(QueryRegistration& reg) {
  reg.complete = true;
  completions_.push_back(
      QueryCompletion{reg.query_id, completions_.size(), sim_now_});
}

bool Scheduler::step() {
  if (rlist_.empty()) return false;
  const ChunkRequest request = rlist_.pop_front();
  const ChunkId chunk = request.chunk_id;
  const std::uint64_t tuples = meta_.tuples_in_chunk(chunk);

  // next_request: probe the cache per unit, strip what is resident.
  struct UnitState {
    ColumnId column;
    std::uint64_t span_begin = 0;   // padded segment bounds
    std::uint64_t span_end = 0;
    std::uint64_t data_bytes = 0;
    std::vector<std::uint8_t> buffer;
    bool fresh = false;
  };
  std::vector<UnitState> units;
  std::vector<Extent> read_extents;
  std::vector<DataUnitKey> read_origins;

  for (ColumnId col : request.columns) {
    const DataUnitKey key{chunk, col};
    const DirectoryEntry& entry = meta_.directory.at(key);
    UnitState u;
    u.column = col;
    u.span_begin = entry.extents.front().offset;
    u.span_end = entry.extents.back().offset + entry.extents.back().length;
    u.data_bytes = entry.uncompressed_bytes;
    if (auto resident = cache_.lookup(key)) {
      u.buffer.assign(resident->begin(), resident->end());
    } else {
      u.fresh = true;
      u.buffer.resize(u.span_end - u.span_begin);
      for (const Extent& e : entry.extents) {
        read_extents.push_back(e);
        read_origins.push_back(key);
      }
    }
    units.push_back(std::move(u));
  }

  // Read the missing units: page extents round-robin over the array, then
  // per-device elevator merge.
  double io_done = sim_now_;
  if (!read_extents.empty()) {
    auto per_device = dispatch(read_extents, read_origins,
                               device_->device_count());
    for (auto& reqs : per_device) reqs = coalesce(reqs);
    DeviceArray::Completion done = device_->execute(per_device);
    io_done = std::max(io_done, done.finished_at);

    for (std::size_t r = 0; r < done.requests.size(); ++r) {
      const IoRequest& rq = done.requests[r];
      const auto& bytes = done.payloads[r];
      for (const DataUnitKey& key : rq.origins) {
        auto it = std::find_if(units.begin(), units.end(),
                               [&](const UnitState& u) {
                                 return u.column == key.column_id;
                               });
        if (it == units.end()) throw Error("origin key not in this event");
        const std::uint64_t lo = std::max(rq.offset, it->span_begin);
        const std::uint64_t hi =
            std::min(rq.offset + rq.length, it->span_end);
        if (lo < hi)
          std::copy_n(bytes.data() + (lo - rq.offset), hi - lo,
                      it->buffer.data() + (lo - it->span_begin));
      }
    }
  }
  sim_now_ = std::max(sim_now_, io_done);

  // Sharing accounting: any unit consumed by k queries in this event rode a
  // single probe/read; the k-1 extra services are merged hits.
  auto requires_column = [&](QueryId q, ColumnId col) {
    const auto& req_cols = registrations_.at(q).required_columns;
    return std::binary_search(req_cols.begin(), req_cols.end(), col);
  };
  for (const UnitState& u : units) {
    std::uint64_t consumers = 0;
    for (QueryId q : request.queries)
      if (requires_column(q, u.column)) ++consumers;
    if (consumers > 1) shared_hits_ += consumers - 1;
  }

  // Fan-out in ascending query id order; each query sees only its columns.
  for (QueryId q : request.queries) {
    QueryRegistration& reg = registrations_.at(q);
    ChunkColumns payload;
    payload.chunk_id = chunk;
    payload.tuple_count = tuples;
    for (const UnitState& u : units)
      if (requires_column(q, u.column))
        payload.columns.emplace_back(
            u.column, std::span<const std::uint8_t>(u.buffer.data(),
                                                    u.data_bytes));
    sink_.on_chunk(q, payload);
    sim_now_ += static_cast<double>(tuples) * config_.cpu_cost_per_tuple;

    for (ColumnId col : reg.required_columns) {
      const DataUnitKey key{chunk, col};
      refs_.on_delivered(key);
      decrements_[key] += 1;
      if (cache_.policy() == CachePolicy::Wpc && cache_.contains(key))
        cache_.update_counts(key, -1, -1);
    }

    if (!std::binary_search(reg.chunk_order.begin(), reg.chunk_order.end(),
                            chunk))
      throw Error("delivery for a chunk outside the query's plan");
    reg.delivered += 1;
    if (reg.delivered > reg.chunk_order.size())
      throw Error("duplicate delivery: query " + std::to_string(q));
  }
  chunks_delivered_ += 1;

  // The window moves one step forward per served query.
  for (QueryId q : request.queries) {
    QueryRegistration& reg = registrations_.at(q);
    if (reg.cursor < reg.chunk_order.size()) admit_next(reg);
    if (!reg.complete && reg.delivered == reg.chunk_order.size())
      complete_query(reg);
  }

  // Offer every freshly read unit to the cache. The drop rule lives in put:
  // under WPC a unit whose remaining rqn is zero never enters; recency mode
  // caches unconditionally.
  for (UnitState& u : units) {
    if (!u.fresh) continue;
    const DataUnitKey key{chunk, u.column};
    const RefCountTable::Counts counts = refs_.get(key);
    u.buffer.resize(u.data_bytes);
    cache_.put(CacheUnit{key, std::move(u.buffer)}, counts.iqn, counts.rqn);
  }
  return true;
}

RunMetrics Scheduler::run() {
  while (step()) {
  }

  std::vector<QueryId> stalled;
  for (QueryId id : registration_order_)
    if (!registrations_.at(id).complete) stalled.push_back(id);
  if (!stalled.empty()) {
    std::ostringstream os;
    os << "scheduler stall: request list drained with incomplete queries:";
    for (QueryId id : stalled) {
      const auto& reg = registrations_.at(id);
      os << " [q" << id << " delivered " << reg.delivered << "/"
         << reg.chunk_order.size() << " cursor " << reg.cursor << "]";
    }
    throw Error(os.str());
  }

  for (const auto& [key, expected] : expected_) {
    auto it = decrements_.find(key);
    const std::uint64_t applied = it == decrements_.end() ? 0 : it->second;
    if (applied != expected)
      throw Error("conservation violation for chunk " +
                  std::to_string(key.chunk_id) + " column " +
                  std::to_string(key.column_id) + ": applied " +
                  std::to_string(applied) + " expected " +
                  std::to_string(expected));
  }

  RunMetrics m;
  m.completions = completions_;
  m.io = device_->stats();
  m.cache = cache_.stats();
  m.shared_hits = shared_hits_;
  m.sim_time_total = sim_now_;
  m.chunks_delivered = chunks_delivered_;
  return m;
}

}  // namespace htsm
