#include "htsm/bench.hpp"

#include <fstream>

#include "doctest.h"
#include "htsm/rng.hpp"
#include "test_util.hpp"

using namespace htsm;

TEST_CASE("generated tables are bit-identical per seed") {
  test::TempDir tmp("bench");
  ChunkingConfig cc{1024, 4096};
  generate_table(42, 10000, cc, tmp.file("a.htsm"));
  generate_table(42, 10000, cc, tmp.file("b.htsm"));
  generate_table(43, 10000, cc, tmp.file("c.htsm"));

  const auto a = test::fnv1a(test::read_file(tmp.file("a.htsm")));
  const auto b = test::fnv1a(test::read_file(tmp.file("b.htsm")));
  const auto c = test::fnv1a(test::read_file(tmp.file("c.htsm")));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("scale zero produces a valid empty table") {
  test::TempDir tmp("bench");
  GeneratedTable t =
      generate_table(42, 0, ChunkingConfig{1024, 4096}, tmp.file("e.htsm"));
  CHECK(t.meta.chunks() == 0);
  TableMeta reread = open_table(tmp.file("e.htsm"));
  CHECK(reread.schema.columns.size() == 16);
  CHECK(reread.schema.tuple_count == 0);
}

TEST_CASE("the lineitem-like schema has the documented type mix") {
  TableSchema s = lineitem_schema(100);
  REQUIRE(s.columns.size() == 16);
  int int64s = 0, floats = 0, dates = 0, strs = 0;
  for (const auto& c : s.columns) {
    switch (c.type) {
      case ColumnType::Int64: ++int64s; break;
      case ColumnType::Float64: ++floats; break;
      case ColumnType::Date32: ++dates; break;
      case ColumnType::Str16: ++strs; break;
    }
  }
  CHECK(int64s == 6);
  CHECK(floats == 6);
  CHECK(dates == 2);
  CHECK(strs == 2);
  CHECK(s.has_column("l_quantity"));
  CHECK(s.has_column("l_extendedprice"));
  CHECK(s.has_column("l_discount"));
  CHECK(s.has_column("l_tax"));
}

TEST_CASE("workload generation is deterministic and in range") {
  test::TempDir tmp("bench");
  GeneratedTable t = generate_table(7, 5000, ChunkingConfig{512, 4096},
                                    tmp.file("w.htsm"));

  const auto w1 = generate_workload(99, 64, t.meta);
  const auto w2 = generate_workload(99, 64, t.meta);
  const auto w3 = generate_workload(100, 64, t.meta);
  CHECK(w1.size() == 64);
  CHECK(w1 == w2);
  CHECK(w1 != w3);

  // every filter threshold stays within its column's observed range
  for (const std::string& text : w1) {
    const Query q = parse_query(text);
    REQUIRE(q.filter.has_value());
    const ColumnId col = t.meta.schema.column_index(q.filter->column);
    double lo = 0, hi = 0;
    for (ChunkId c = 0; c < t.meta.chunks(); ++c) {
      const ZoneMap& z = t.meta.directory.at(DataUnitKey{c, col}).zone;
      if (c == 0) {
        lo = z.min_value;
        hi = z.max_value;
      } else {
        lo = std::min(lo, z.min_value);
        hi = std::max(hi, z.max_value);
      }
    }
    CHECK(q.filter->value >= lo);
    CHECK(q.filter->value <= hi);
  }
}

TEST_CASE("every emitted result equals the oracle") {
  test::TempDir tmp("bench");
  GeneratedTable t = generate_table(11, 4000, ChunkingConfig{256, 4096},
                                    tmp.file("r.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("r.htsm");
  cfg.mode = PolicyMode::HighTh;
  cfg.window = 8;
  cfg.cache_fraction = 0.2;

  const auto texts = generate_workload(5, 12, t.meta);
  BatchOutcome out = run_batch(t.meta, cfg, texts);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const QueryResult oracle =
        oracle_scan(parse_query(texts[i]), t.meta.schema, t.data,
                    t.meta.config.tuples_per_chunk);
    CHECK(out.results[i] == oracle);
  }
}

TEST_CASE("highth issues no more requests than lru on a shared batch") {
  test::TempDir tmp("bench");
  GeneratedTable t = generate_table(3, 8000, ChunkingConfig{512, 4096},
                                    tmp.file("s.htsm"));

  // heavy overlap: every query aggregates one of two columns, no pruning
  std::vector<std::string> texts;
  for (int i = 0; i < 8; ++i)
    texts.push_back(i % 2 == 0
                        ? "SELECT SUM(l_extendedprice) FROM lineitem"
                        : "SELECT AVG(l_tax) FROM lineitem");

  BenchConfig cfg;
  cfg.table_path = tmp.file("s.htsm");
  cfg.window = 30;
  cfg.cache_fraction = 0.1;

  cfg.mode = PolicyMode::HighTh;
  const auto high = run_batch(t.meta, cfg, texts).metrics;
  cfg.mode = PolicyMode::Lru;
  const auto lru = run_batch(t.meta, cfg, texts).metrics;
  CHECK(high.io.request_count <= lru.io.request_count);
}

TEST_CASE("full windows make request counts independent of cache size") {
  test::TempDir tmp("bench");
  GeneratedTable t = generate_table(17, 6000, ChunkingConfig{512, 4096},
                                    tmp.file("f.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("f.htsm");
  cfg.mode = PolicyMode::HighTh;
  cfg.window = 30;  // >= chunks per query (12 chunks total)
  cfg.batches = 1;
  cfg.queries_per_batch = 8;

  std::vector<std::uint64_t> counts;
  for (double frac : {0.1, 0.2, 0.5, 0.0}) {
    cfg.cache_fraction = frac;
    ExperimentOutcome out = run_experiment(cfg, t.meta);
    counts.push_back(out.batches[0].metrics.io.request_count);
  }
  for (std::size_t i = 1; i < counts.size(); ++i)
    CHECK(counts[i] == counts[0]);
}

TEST_CASE("a cold single query reads exactly its pruned unit bytes") {
  test::TempDir tmp("bench");
  // 512 tuples/chunk x 8-byte columns = one 4096-byte page per unit, so
  // padded reads equal data bytes exactly.
  GeneratedTable t = generate_table(23, 4096, ChunkingConfig{512, 4096},
                                    tmp.file("c.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("c.htsm");
  cfg.mode = PolicyMode::Cs;
  cfg.cache_fraction = 0.0;

  const std::string text = "SELECT SUM(l_quantity) FROM lineitem";
  BatchOutcome out = run_batch(t.meta, cfg, {text});

  std::uint64_t expected_bytes = 0;
  const QueryPlan p = plan(parse_query(text), t.meta, 1);
  for (ChunkId c : p.pruned_chunks)
    for (ColumnId col : p.required_columns)
      expected_bytes +=
          t.meta.directory.at(DataUnitKey{c, col}).uncompressed_bytes;
  CHECK(out.metrics.io.bytes_read == expected_bytes);
}

TEST_CASE("metrics JSON is byte-identical across reruns") {
  test::TempDir tmp("bench");
  GeneratedTable t = generate_table(31, 3000, ChunkingConfig{256, 4096},
                                    tmp.file("d.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("d.htsm");
  cfg.batches = 2;
  cfg.queries_per_batch = 4;
  cfg.seed = 77;

  const std::string a =
      run_experiment(cfg, t.meta).to_metrics_json(cfg).dump(2);
  const std::string b =
      run_experiment(cfg, t.meta).to_metrics_json(cfg).dump(2);
  CHECK(a == b);
}

TEST_CASE("sweep emits one row per cell and honors the monotone window law") {
  test::TempDir tmp("sweep");
  nlohmann::ordered_json grid;
  grid["seed"] = 5;
  grid["scale"] = 3000;
  grid["tuples_per_chunk"] = 256;
  grid["page_bytes"] = 4096;
  grid["batches"] = 1;
  grid["queries_per_batch"] = 6;
  grid["mode"] = "highth";
  grid["cache_fraction"] = 0.1;
  grid["window"] = {1, 5, 10, 15, 30};
  std::ofstream(tmp.file("grid.json")) << grid.dump();

  run_sweep(tmp.file("grid.json"), tmp.path() / "out");

  std::ifstream csv(tmp.path() / "out" / "summary.csv");
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("window") != std::string::npos);

  std::vector<std::uint64_t> requests;
  std::string line;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    // cell,window,request_count,bytes,sim,ratio,error
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto pos = line.find(',', start);
      fields.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    REQUIRE(fields.size() >= 6);
    CHECK(fields.back().empty());  // no errors recorded
    requests.push_back(std::stoull(fields[2]));
  }
  REQUIRE(requests.size() == 5);
  for (std::size_t i = 1; i < requests.size(); ++i)
    CHECK(requests[i] <= requests[i - 1]);  // wider windows, fewer requests
}

TEST_CASE("doubling the page size roughly halves striped request counts") {
  test::TempDir tmp("page");
  BenchConfig cfg;
  cfg.mode = PolicyMode::Cs;
  cfg.cache_fraction = 0.0;
  cfg.devices = 2;  // striping keeps page reads from re-merging
  cfg.batches = 1;

  std::vector<std::uint64_t> requests;
  for (std::uint64_t page : {4096u, 8192u}) {
    GeneratedTable t =
        generate_table(9, 16384, ChunkingConfig{4096, page},
                       tmp.file("p" + std::to_string(page) + ".htsm"));
    cfg.table_path = tmp.file("p" + std::to_string(page) + ".htsm");
    cfg.page_bytes = page;
    BatchOutcome out =
        run_batch(t.meta, cfg, {"SELECT SUM(l_quantity) FROM lineitem"});
    requests.push_back(out.metrics.io.request_count);
  }
  // 4096 tuples x 8B = 8 pages at 4 KiB vs 4 pages at 8 KiB per unit
  CHECK(requests[1] * 2 == requests[0]);
}

TEST_CASE("report renders text and csv and validates schema") {
  test::TempDir tmp("report");
  GeneratedTable t = generate_table(13, 2000, ChunkingConfig{256, 4096},
                                    tmp.file("t.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("t.htsm");
  cfg.batches = 1;
  cfg.queries_per_batch = 3;

  cfg.mode = PolicyMode::Cs;
  std::ofstream(tmp.file("cs.json"))
      << run_experiment(cfg, t.meta).to_metrics_json(cfg).dump(2);
  cfg.mode = PolicyMode::HighTh;
  std::ofstream(tmp.file("high.json"))
      << run_experiment(cfg, t.meta).to_metrics_json(cfg).dump(2);

  const std::string text =
      render_report({tmp.file("cs.json"), tmp.file("high.json")}, "text");
  CHECK(text.find("run summary") != std::string::npos);
  CHECK(text.find("% reduction") != std::string::npos);

  const std::string csv =
      render_report({tmp.file("cs.json"), tmp.file("high.json")}, "csv");
  CHECK(csv.find("request_count") != std::string::npos);

  SUBCASE("a missing field is reported by name") {
    nlohmann::ordered_json doc = load_metrics_file(tmp.file("cs.json"));
    doc.erase("totals");
    std::ofstream(tmp.file("broken.json")) << doc.dump();
    CHECK_THROWS_WITH_AS(load_metrics_file(tmp.file("broken.json")),
                         doctest::Contains("totals"), Error);
  }
  SUBCASE("malformed json is rejected") {
    std::ofstream(tmp.file("junk.json")) << "{not json";
    CHECK_THROWS_AS(load_metrics_file(tmp.file("junk.json")), Error);
  }
  SUBCASE("unknown format is rejected") {
    CHECK_THROWS_AS(render_report({tmp.file("cs.json")}, "xml"), Error);
  }
}

TEST_CASE("run_experiment validates its configuration") {
  test::TempDir tmp("bench");
  GeneratedTable t =
      generate_table(1, 100, ChunkingConfig{64, 4096}, tmp.file("v.htsm"));
  BenchConfig cfg;
  cfg.table_path = tmp.file("v.htsm");
  cfg.batches = 0;
  CHECK_THROWS_AS(run_experiment(cfg, t.meta), Error);
}

TEST_CASE("a 64-query batch reads strictly less at W=30 than at W=1") {
  test::TempDir tmp("b64");
  GeneratedTable t = generate_table(21, 12000, ChunkingConfig{512, 4096},
                                    tmp.file("t.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("t.htsm");
  cfg.mode = PolicyMode::HighTh;
  cfg.cache_fraction = 0.1;

  const auto texts = generate_workload(64, 64, t.meta);
  cfg.window = 30;
  const std::uint64_t wide = run_batch(t.meta, cfg, texts).metrics.io.request_count;
  cfg.window = 1;
  const std::uint64_t narrow =
      run_batch(t.meta, cfg, texts).metrics.io.request_count;
  CHECK(wide < narrow);
}

TEST_CASE("shrinking the cache never reduces the request count") {
  test::TempDir tmp("mono");
  GeneratedTable t = generate_table(35, 8000, ChunkingConfig{512, 4096},
                                    tmp.file("t.htsm"));

  BenchConfig cfg;
  cfg.table_path = tmp.file("t.htsm");
  cfg.mode = PolicyMode::Cs;  // W=1: the cache is the only reuse channel

  const auto texts = generate_workload(2, 8, t.meta);
  std::uint64_t prev = 0;
  for (double frac : {0.0, 0.5, 0.2, 0.1, 0.05}) {  // unlimited first
    cfg.cache_fraction = frac;
    const std::uint64_t reqs =
        run_batch(t.meta, cfg, texts).metrics.io.request_count;
    CHECK(reqs >= prev);
    prev = reqs;
  }
}

TEST_CASE("a single-cell sweep reproduces run_experiment totals") {
  test::TempDir tmp("cell");
  nlohmann::ordered_json grid;
  grid["seed"] = 6;
  grid["scale"] = 2000;
  grid["tuples_per_chunk"] = 256;
  grid["page_bytes"] = 4096;
  grid["batches"] = 1;
  grid["queries_per_batch"] = 4;
  grid["mode"] = "highth";
  grid["window"] = 8;
  grid["cache_fraction"] = 0.2;
  std::ofstream(tmp.file("grid.json")) << grid.dump();
  run_sweep(tmp.file("grid.json"), tmp.path() / "out");

  nlohmann::ordered_json cell =
      load_metrics_file(tmp.path() / "out" / "cell_0000.json");

  BenchConfig cfg;
  cfg.seed = 6;
  cfg.scale = 2000;
  cfg.tuples_per_chunk = 256;
  cfg.page_bytes = 4096;
  cfg.batches = 1;
  cfg.queries_per_batch = 4;
  cfg.mode = PolicyMode::HighTh;
  cfg.window = 8;
  cfg.cache_fraction = 0.2;
  GeneratedTable t = generate_table(6, 2000, ChunkingConfig{256, 4096},
                                    tmp.file("t.htsm"));
  cfg.table_path = tmp.file("t.htsm");
  nlohmann::ordered_json direct =
      run_experiment(cfg, t.meta).to_metrics_json(cfg);

  CHECK(cell.at("totals") == direct.at("totals"));
  CHECK(cell.at("batches") == direct.at("batches"));
}

TEST_CASE("a failing sweep cell is recorded and the sweep continues") {
  test::TempDir tmp("badcell");
  nlohmann::ordered_json grid;
  grid["seed"] = 8;
  grid["scale"] = 1000;
  grid["tuples_per_chunk"] = 256;
  grid["page_bytes"] = 4096;
  grid["batches"] = 1;
  grid["queries_per_batch"] = 2;
  grid["window"] = 4;
  grid["cache_fraction"] = 0.5;
  grid["mode"] = {"highth", "nonsense", "cs"};
  std::ofstream(tmp.file("grid.json")) << grid.dump();

  run_sweep(tmp.file("grid.json"), tmp.path() / "out");

  std::ifstream csv(tmp.path() / "out" / "summary.csv");
  std::string line;
  std::getline(csv, line);  // header
  int ok = 0, failed = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (line.find("nonsense") != std::string::npos &&
        line.find("unknown policy mode") != std::string::npos)
      ++failed;
    else if (line.back() == ',')
      ++ok;
  }
  CHECK(ok == 2);
  CHECK(failed == 1);
  CHECK(std::filesystem::exists(tmp.path() / "out" / "cell_0000.json"));
  CHECK(!std::filesystem::exists(tmp.path() / "out" / "cell_0001.json"));
  CHECK(std::filesystem::exists(tmp.path() / "out" / "cell_0002.json"));
}

TEST_CASE("cumulative completion times never decrease") {
  test::TempDir tmp("cum");
  GeneratedTable t = generate_table(44, 6000, ChunkingConfig{512, 4096},
                                    tmp.file("t.htsm"));
  BenchConfig cfg;
  cfg.table_path = tmp.file("t.htsm");
  cfg.batches = 2;
  cfg.queries_per_batch = 8;
  cfg.mode = PolicyMode::HighTh;
  cfg.window = 4;
  cfg.cache_fraction = 0.1;

  nlohmann::ordered_json doc =
      run_experiment(cfg, t.meta).to_metrics_json(cfg);
  for (const auto& batch : doc.at("batches")) {
    std::map<std::uint64_t, double> by_index;
    for (const auto& q : batch.at("queries"))
      by_index[q.at("completion_index").get<std::uint64_t>()] =
          q.at("sim_time_at_completion").get<double>();
    double prev = 0.0;
    for (const auto& [idx, t_at] : by_index) {
      CHECK(t_at >= prev);
      prev = t_at;
    }
  }
}

TEST_CASE("device regimes: I/O-bound runs diverge, CPU-bound runs converge") {
  test::TempDir tmp("regime");
  GeneratedTable t = generate_table(12, 10000, ChunkingConfig{512, 4096},
                                    tmp.file("t.htsm"));
  const auto texts = generate_workload(12, 12, t.meta);

  BenchConfig cfg;
  cfg.table_path = tmp.file("t.htsm");
  cfg.window = 30;
  cfg.cache_fraction = 0.1;

  auto total_time = [&](PolicyMode mode, DeviceBackend dev, double cpu) {
    cfg.mode = mode;
    cfg.device = dev;
    cfg.cpu_cost_per_tuple = cpu;
    return run_batch(t.meta, cfg, texts).metrics.sim_time_total;
  };

  // slow disk, free compute: merged windows win outright
  const double hdd_cs = total_time(PolicyMode::Cs, DeviceBackend::Hdd, 0.0);
  const double hdd_high =
      total_time(PolicyMode::HighTh, DeviceBackend::Hdd, 0.0);
  CHECK(hdd_high < hdd_cs);

  // fast disk, costly compute: both models sit on the same compute floor
  const double ssd_cs =
      total_time(PolicyMode::Cs, DeviceBackend::Ssd, 1e-6);
  const double ssd_high =
      total_time(PolicyMode::HighTh, DeviceBackend::Ssd, 1e-6);
  CHECK(std::abs(ssd_high - ssd_cs) / ssd_cs < 0.05);
}
