#include "htsm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>

#include "htsm/rng.hpp"

namespace htsm {

using nlohmann::ordered_json;

const char* device_backend_name(DeviceBackend b) {
  switch (b) {
    case DeviceBackend::Hdd: return "hdd";
    case DeviceBackend::Ssd: return "ssd";
    case DeviceBackend::File: return "file";
  }
  return "?";
}

DeviceBackend parse_device_backend(const std::string& name) {
  if (name == "hdd") return DeviceBackend::Hdd;
  if (name == "ssd") return DeviceBackend::Ssd;
  if (name == "file") return DeviceBackend::File;
  throw Error("unknown device backend: " + name);
}

TableSchema lineitem_schema(std::uint64_t tuple_count) {
  TableSchema s;
  s.tuple_count = tuple_count;
  auto add = [&](const char* name, ColumnType t) {
    s.columns.push_back(ColumnSpec{name, t});
  };
  add("l_orderkey", ColumnType::Int64);
  add("l_partkey", ColumnType::Int64);
  add("l_suppkey", ColumnType::Int64);
  add("l_linenumber", ColumnType::Int64);
  add("l_quantity", ColumnType::Int64);
  add("l_receiptlag", ColumnType::Int64);
  add("l_extendedprice", ColumnType::Float64);
  add("l_discount", ColumnType::Float64);
  add("l_tax", ColumnType::Float64);
  add("l_supplycost", ColumnType::Float64);
  add("l_retailprice", ColumnType::Float64);
  add("l_margin", ColumnType::Float64);
  add("l_shipdate", ColumnType::Date32);
  add("l_commitdate", ColumnType::Date32);
  add("l_returnflag", ColumnType::Str16);
  add("l_shipmode", ColumnType::Str16);
  return s;
}

namespace {

std::vector<std::int64_t> gen_int64(Rng& rng, std::uint64_t n,
                                    std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = rng.next_in_range(lo, hi);
  return v;
}

std::vector<double> gen_float64(Rng& rng, std::uint64_t n, double lo,
                                double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_double(lo, hi);
  return v;
}

std::vector<std::int32_t> gen_date32(Rng& rng, std::uint64_t n,
                                     std::int32_t lo, std::int32_t hi) {
  std::vector<std::int32_t> v(n);
  for (auto& x : v)
    x = static_cast<std::int32_t>(rng.next_in_range(lo, hi));
  return v;
}

std::vector<Str16> gen_str16(Rng& rng, std::uint64_t n,
                             const std::vector<const char*>& pool) {
  std::vector<Str16> v(n);
  for (auto& x : v) x = make_str16(pool[rng.next_below(pool.size())]);
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TableData generate_rows(std::uint64_t seed, std::uint64_t scale,
                        const TableSchema& schema) {
  TableData data;
  data.columns.resize(schema.columns.size());
  for (ColumnId c = 0; c < schema.columns.size(); ++c) {
    Rng rng(mix_seed(seed, c));
    const std::string& name = schema.columns[c].name;
    if (name == "l_orderkey") {
      // Nondecreasing order keys give tight zone maps, so filters on this
      // column actually prune chunks.
      std::vector<std::int64_t> v(scale);
      std::int64_t cur = 1;
      for (auto& x : v) {
        cur += static_cast<std::int64_t>(rng.next_below(3));
        x = cur;
      }
      data.columns[c] = ColumnData(std::move(v));
    } else if (name == "l_partkey") {
      data.columns[c] = ColumnData(gen_int64(rng, scale, 1, 200000));
    } else if (name == "l_suppkey") {
      data.columns[c] = ColumnData(gen_int64(rng, scale, 1, 10000));
    } else if (name == "l_linenumber") {
      data.columns[c] = ColumnData(gen_int64(rng, scale, 1, 7));
    } else if (name == "l_quantity") {
      data.columns[c] = ColumnData(gen_int64(rng, scale, 1, 50));
    } else if (name == "l_receiptlag") {
      data.columns[c] = ColumnData(gen_int64(rng, scale, 1, 30));
    } else if (name == "l_extendedprice") {
      data.columns[c] = ColumnData(gen_float64(rng, scale, 901.0, 104950.0));
    } else if (name == "l_discount") {
      data.columns[c] = ColumnData(gen_float64(rng, scale, 0.0, 0.10));
    } else if (name == "l_tax") {
      data.columns[c] = ColumnData(gen_float64(rng, scale, 0.0, 0.08));
    } else if (name == "l_supplycost") {
      data.columns[c] = ColumnData(gen_float64(rng, scale, 1.0, 1000.0));
    } else if (name == "l_retailprice") {
      data.columns[c] = ColumnData(gen_float64(rng, scale, 900.0, 2000.0));
    } else if (name == "l_margin") {
      data.columns[c] = ColumnData(gen_float64(rng, scale, -0.05, 0.35));
    } else if (schema.columns[c].type == ColumnType::Date32) {
      data.columns[c] = ColumnData(gen_date32(rng, scale, 8035, 10561));
    } else if (name == "l_returnflag") {
      data.columns[c] = ColumnData(gen_str16(rng, scale, {"R", "A", "N"}));
    } else if (schema.columns[c].type == ColumnType::Str16) {
      data.columns[c] = ColumnData(gen_str16(
          rng, scale, {"AIR", "MAIL", "SHIP", "TRUCK", "RAIL", "FOB REG"}));
    } else if (schema.columns[c].type == ColumnType::Int64) {
      data.columns[c] = ColumnData(gen_int64(rng, scale, 0, 1000000));
    } else {
      data.columns[c] = ColumnData(gen_float64(rng, scale, 0.0, 1.0));
    }
  }
  return data;
}

GeneratedTable generate_table(std::uint64_t seed, std::uint64_t scale,
                              const ChunkingConfig& config,
                              const std::filesystem::path& path) {
  const TableSchema schema = lineitem_schema(scale);
  TableData data = generate_rows(seed, scale, schema);
  TableMeta meta = write_table(schema, config, data, path);
  return GeneratedTable{std::move(meta), std::move(data)};
}

std::vector<std::string> generate_workload(std::uint64_t seed,
                                           std::uint32_t q,
                                           const TableMeta& meta) {
  if (q == 0) throw Error("workload needs at least one query");
  std::vector<ColumnId> numeric;
  for (ColumnId c = 0; c < meta.schema.columns.size(); ++c)
    if (column_type_is_numeric(meta.schema.columns[c].type))
      numeric.push_back(c);
  if (numeric.empty()) throw Error("schema has no numeric columns");

  // Global min/max per column from the zone maps.
  const std::uint64_t chunks = meta.chunks();
  auto column_range = [&](ColumnId c) -> std::pair<double, double> {
    double lo = 0.0, hi = 0.0;
    for (ChunkId ch = 0; ch < chunks; ++ch) {
      const ZoneMap& z = meta.directory.at(DataUnitKey{ch, c}).zone;
      if (ch == 0) {
        lo = z.min_value;
        hi = z.max_value;
      } else {
        lo = std::min(lo, z.min_value);
        hi = std::max(hi, z.max_value);
      }
    }
    return {lo, hi};
  };

  std::vector<std::string> out;
  out.reserve(q);
  for (std::uint32_t i = 0; i < q; ++i) {
    Rng rng(mix_seed(seed, 0x57510000ULL + i));
    const char* fn = rng.next_below(2) == 0 ? "SUM" : "AVG";
    const ColumnId agg_col = numeric[rng.next_below(numeric.size())];
    const ColumnId filter_col = numeric[rng.next_below(numeric.size())];
    auto [lo, hi] = column_range(filter_col);
    double alpha = (lo + hi) / 2.0 + rng.next_normal() * (hi - lo) / 6.0;
    alpha = std::clamp(alpha, lo, hi);
    out.push_back(std::string("SELECT ") + fn + "(" +
                  meta.schema.columns[agg_col].name + ") FROM lineitem WHERE " +
                  meta.schema.columns[filter_col].name + " >= " +
                  format_double(alpha));
  }
  return out;
}

namespace {

/// Fold sink: one aggregate state per registered query.
class EngineSink : public DeliverySink {
 public:
  EngineSink(const TableSchema& schema, std::vector<QueryPlan> plans)
      : schema_(schema), plans_(std::move(plans)), states_(plans_.size()) {}

  void on_chunk(QueryId query, const ChunkColumns& columns) override {
    fold_chunk(states_.at(query), columns, plans_.at(query), schema_);
  }

  QueryResult result(QueryId query, AggFunc agg) const {
    return finalize(states_.at(query), agg);
  }

 private:
  const TableSchema& schema_;
  std::vector<QueryPlan> plans_;
  std::vector<AggState> states_;
};

RunConfig make_run_config(const BenchConfig& config, const TableMeta& meta) {
  RunConfig rc;
  rc.mode = config.mode;
  if (config.cache_fraction > 0.0) {
    const double bytes =
        config.cache_fraction * static_cast<double>(meta.total_data_bytes());
    rc.cache_capacity_bytes =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(bytes));
  } else {
    rc.cache_capacity_bytes = std::numeric_limits<std::uint64_t>::max();
  }
  rc.device.profile = config.device == DeviceBackend::Hdd
                          ? DeviceProfile::hdd()
                          : DeviceProfile::ssd();
  rc.device.device_count = config.devices;
  rc.device.file_backed = true;
  rc.device.table_path = config.table_path;
  rc.cpu_cost_per_tuple = config.cpu_cost_per_tuple;
  return rc;
}

}  // namespace

BatchOutcome run_batch(const TableMeta& meta, const BenchConfig& config,
                       const std::vector<std::string>& query_texts) {
  std::vector<Query> queries;
  std::vector<QueryPlan> plans;
  for (const std::string& text : query_texts) {
    Query q = parse_query(text);
    plans.push_back(plan(q, meta, std::max<std::uint32_t>(1, config.window)));
    queries.push_back(std::move(q));
  }

  EngineSink sink(meta.schema, plans);
  Scheduler scheduler(meta, make_run_config(config, meta), sink);

  const auto wall_start = std::chrono::steady_clock::now();
  for (QueryId id = 0; id < plans.size(); ++id)
    scheduler.register_query(id, plans[id]);

  BatchOutcome outcome;
  outcome.metrics = scheduler.run();
  const auto wall_end = std::chrono::steady_clock::now();
  outcome.wall_seconds =
      std::chrono::duration<double>(wall_end - wall_start).count();

  for (QueryId id = 0; id < queries.size(); ++id)
    outcome.results.push_back(sink.result(id, queries[id].agg));
  outcome.query_texts = query_texts;
  return outcome;
}

ExperimentOutcome run_experiment(const BenchConfig& config,
                                 const TableMeta& meta) {
  if (config.batches == 0 || config.queries_per_batch == 0)
    throw Error("batches and queries_per_batch must be >= 1");
  ExperimentOutcome outcome;
  for (std::uint32_t b = 0; b < config.batches; ++b) {
    const std::uint64_t batch_seed = mix_seed(config.seed, 1000 + b);
    const std::vector<std::string> texts =
        generate_workload(batch_seed, config.queries_per_batch, meta);
    outcome.batches.push_back(run_batch(meta, config, texts));
  }
  return outcome;
}

ordered_json ExperimentOutcome::to_metrics_json(
    const BenchConfig& config) const {
  ordered_json doc;
  doc["schema"] = 1;
  ordered_json cfg;
  cfg["seed"] = config.seed;
  cfg["scale"] = config.scale;
  cfg["batches"] = config.batches;
  cfg["queries_per_batch"] = config.queries_per_batch;
  cfg["mode"] = policy_mode_name(config.mode);
  cfg["window"] = config.window;
  cfg["cache_fraction"] = config.cache_fraction;
  cfg["device"] = device_backend_name(config.device);
  cfg["tuples_per_chunk"] = config.tuples_per_chunk;
  cfg["page_bytes"] = config.page_bytes;
  cfg["devices"] = config.devices;
  cfg["cpu_cost_per_tuple"] = config.cpu_cost_per_tuple;
  cfg["table"] = config.table_path.string();
  doc["config"] = std::move(cfg);

  std::uint64_t total_requests = 0, total_bytes = 0, total_lookups = 0,
                total_hits = 0, total_shared = 0;
  double total_sim = 0.0;

  ordered_json batches = ordered_json::array();
  for (std::size_t b = 0; b < this->batches.size(); ++b) {
    const BatchOutcome& batch = this->batches[b];
    ordered_json jb;
    jb["batch"] = b;

    // completion_index by query id
    std::vector<std::uint64_t> completion_index(batch.results.size(), 0);
    std::vector<double> completion_time(batch.results.size(), 0.0);
    for (const QueryCompletion& c : batch.metrics.completions) {
      completion_index.at(c.query_id) = c.completion_index;
      completion_time.at(c.query_id) = c.sim_time;
    }

    ordered_json queries = ordered_json::array();
    for (std::size_t qid = 0; qid < batch.results.size(); ++qid) {
      ordered_json jq;
      jq["query_id"] = qid;
      jq["text"] = batch.query_texts.at(qid);
      jq["completion_index"] = completion_index[qid];
      if (batch.results[qid].value.has_value())
        jq["result"] = *batch.results[qid].value;
      else
        jq["result"] = nullptr;
      jq["matching_rows"] = batch.results[qid].matching_rows;
      jq["sim_time_at_completion"] = completion_time[qid];
      queries.push_back(std::move(jq));
    }
    jb["queries"] = std::move(queries);

    const RunMetrics& m = batch.metrics;
    ordered_json io;
    io["request_count"] = m.io.request_count;
    io["bytes_read"] = m.io.bytes_read;
    io["sim_time"] = m.io.sim_time;
    ordered_json per_device = ordered_json::array();
    for (const PerDeviceStats& d : m.io.per_device) {
      ordered_json jd;
      jd["requests"] = d.requests;
      jd["bytes"] = d.bytes;
      jd["busy_seconds"] = d.busy_seconds;
      per_device.push_back(std::move(jd));
    }
    io["per_device"] = std::move(per_device);
    jb["io"] = std::move(io);

    ordered_json cache;
    cache["lookups"] = m.cache.lookups;
    cache["hits"] = m.cache.hits;
    cache["shared_hits"] = m.shared_hits;
    cache["hit_ratio"] = m.effective_hit_ratio();
    jb["cache"] = std::move(cache);

    jb["chunks_delivered"] = m.chunks_delivered;
    jb["sim_time_total"] = m.sim_time_total;
    if (config.device == DeviceBackend::File)
      jb["wall_seconds"] = batch.wall_seconds;
    batches.push_back(std::move(jb));

    total_requests += m.io.request_count;
    total_bytes += m.io.bytes_read;
    total_lookups += m.cache.lookups;
    total_hits += m.cache.hits;
    total_shared += m.shared_hits;
    total_sim += m.sim_time_total;
  }
  doc["batches"] = std::move(batches);

  ordered_json totals;
  totals["request_count"] = total_requests;
  totals["bytes_read"] = total_bytes;
  totals["sim_time"] = total_sim;
  totals["lookups"] = total_lookups;
  totals["cache_hits"] = total_hits;
  totals["shared_hits"] = total_shared;
  totals["hit_ratio"] =
      total_lookups == 0
          ? 0.0
          : static_cast<double>(total_hits + total_shared) /
                static_cast<double>(total_lookups);
  doc["totals"] = std::move(totals);
  return doc;
}

}  // namespace htsm
