#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "htsm/bench.hpp"
#include "htsm/rng.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_gen(std::uint64_t seed, std::uint64_t scale, const std::string& out,
            std::uint64_t chunk_tuples, std::uint64_t page_bytes) {
  htsm::ChunkingConfig cc{chunk_tuples, page_bytes};
  htsm::GeneratedTable table = htsm::generate_table(seed, scale, cc, out);
  std::cout << "wrote " << out << ": " << scale << " tuples, "
            << table.meta.chunks() << " chunks, "
            << table.meta.schema.columns.size() << " columns, "
            << fs::file_size(out) << " bytes\n";
  return 0;
}

int cmd_run(htsm::BenchConfig config, const std::string& out) {
  htsm::TableMeta meta = htsm::open_table(config.table_path);
  config.scale = meta.schema.tuple_count;
  config.tuples_per_chunk = meta.config.tuples_per_chunk;
  config.page_bytes = meta.config.page_bytes;

  htsm::ExperimentOutcome outcome = htsm::run_experiment(config, meta);
  nlohmann::ordered_json doc = outcome.to_metrics_json(config);

  if (out.empty() || out == "-") {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::ofstream f(out);
    if (!f) throw htsm::Error("cannot write metrics to " + out);
    f << doc.dump(2) << "\n";
    std::cout << "wrote " << out << "\n";
  }

  const auto& totals = doc.at("totals");
  std::cout << "mode=" << htsm::policy_mode_name(config.mode)
            << " requests=" << totals.at("request_count")
            << " bytes=" << totals.at("bytes_read")
            << " sim_time=" << totals.at("sim_time")
            << " hit_ratio=" << totals.at("hit_ratio") << "\n";
  return 0;
}

int cmd_report(const std::string& in, const std::string& format) {
  std::vector<fs::path> files;
  if (fs::is_directory(in)) {
    for (const auto& entry : fs::directory_iterator(in))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(in);
  }
  std::cout << htsm::render_report(files, format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"htsm: chunked columnar storage manager benchmark"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic table file");
  std::uint64_t seed = 42, scale = 100000;
  std::uint64_t chunk_tuples = 4096, page_bytes = 4096;
  std::string gen_out = "lineitem.htsm";
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--scale", scale, "tuple count");
  gen->add_option("--out", gen_out, "output table path")->required();
  gen->add_option("--chunk-tuples", chunk_tuples, "tuples per chunk");
  gen->add_option("--page-bytes", page_bytes, "page size in bytes");

  // run
  auto* run = app.add_subcommand("run", "run a batch-query experiment");
  htsm::BenchConfig config;
  std::string mode = "highth", device = "hdd", run_out = "metrics.json";
  std::string table;
  run->add_option("--table", table, "table file from gen")->required();
  run->add_option("--mode", mode, "lru|cs|highth");
  run->add_option("--window", config.window, "request window size W");
  run->add_option("--cache-frac", config.cache_fraction,
                  "cache capacity as a fraction of table bytes; 0 = unlimited");
  run->add_option("--device", device, "hdd|ssd|file");
  run->add_option("--batches", config.batches, "number of query batches");
  run->add_option("--queries", config.queries_per_batch, "queries per batch");
  run->add_option("--seed", config.seed, "workload seed");
  run->add_option("--devices", config.devices, "disk count in the array");
  run->add_option("--cpu-cost", config.cpu_cost_per_tuple,
                  "seconds of compute charged per delivered tuple");
  run->add_option("--out", run_out, "metrics JSON path ('-' for stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
  std::string grid, sweep_out = "sweep_out";
  sweep->add_option("--grid", grid, "grid JSON document")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "summarize metrics files");
  std::string report_in, format = "text";
  report->add_option("--in", report_in, "metrics file or directory")
      ->required();
  report->add_option("--format", format, "text|csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(seed, scale, gen_out, chunk_tuples,
                                      page_bytes);
    if (run->parsed()) {
      config.mode = htsm::parse_policy_mode(mode);
      config.device = htsm::parse_device_backend(device);
      config.table_path = table;
      return cmd_run(config, run_out);
    }
    if (sweep->parsed()) {
      htsm::run_sweep(grid, sweep_out);
      std::cout << "wrote " << sweep_out << "/summary.csv\n";
      return 0;
    }
    if (report->parsed()) return cmd_report(report_in, format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
