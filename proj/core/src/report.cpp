#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "htsm/bench.hpp"
#include "htsm/rng.hpp"

namespace htsm {

using nlohmann::ordered_json;

namespace {

const ordered_json& require_field(const ordered_json& doc,
                                  const std::string& name) {
  if (!doc.contains(name))
    throw Error("metrics document missing field '" + name + "'");
  return doc.at(name);
}

BenchConfig config_from_json(const ordered_json& j, const BenchConfig& base) {
  BenchConfig c = base;
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("scale")) c.scale = j.at("scale").get<std::uint64_t>();
  if (j.contains("batches")) c.batches = j.at("batches").get<std::uint32_t>();
  if (j.contains("queries_per_batch"))
    c.queries_per_batch = j.at("queries_per_batch").get<std::uint32_t>();
  if (j.contains("mode"))
    c.mode = parse_policy_mode(j.at("mode").get<std::string>());
  if (j.contains("window")) c.window = j.at("window").get<std::uint32_t>();
  if (j.contains("cache_fraction"))
    c.cache_fraction = j.at("cache_fraction").get<double>();
  if (j.contains("device"))
    c.device = parse_device_backend(j.at("device").get<std::string>());
  if (j.contains("tuples_per_chunk"))
    c.tuples_per_chunk = j.at("tuples_per_chunk").get<std::uint64_t>();
  if (j.contains("page_bytes"))
    c.page_bytes = j.at("page_bytes").get<std::uint64_t>();
  if (j.contains("devices")) c.devices = j.at("devices").get<std::uint32_t>();
  if (j.contains("cpu_cost_per_tuple"))
    c.cpu_cost_per_tuple = j.at("cpu_cost_per_tuple").get<double>();
  if (j.contains("table"))
    c.table_path = j.at("table").get<std::string>();
  return c;
}

std::string json_scalar_to_csv(const ordered_json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out += ch;
  }
  out += "\"";
  return out;
}

}  // namespace

ordered_json load_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metrics file: " + path.string());
  ordered_json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw Error("malformed metrics file " + path.string() + ": " + e.what());
  }
  const auto& version = require_field(doc, "schema");
  if (!version.is_number_integer() || version.get<int>() != 1)
    throw Error("unsupported metrics schema version in " + path.string());
  require_field(doc, "config");
  require_field(doc, "batches");
  require_field(doc, "totals");
  return doc;
}

void run_sweep(const std::filesystem::path& grid_path,
               const std::filesystem::path& out_dir) {
  std::ifstream in(grid_path);
  if (!in) throw Error("cannot open grid file: " + grid_path.string());
  ordered_json grid;
  try {
    in >> grid;
  } catch (const std::exception& e) {
    throw Error(std::string("malformed grid file: ") + e.what());
  }
  if (!grid.is_object()) throw Error("grid document must be a JSON object");

  std::filesystem::create_directories(out_dir);

  // Axes are the array-valued fields, in document order; scalars override
  // the base configuration directly.
  BenchConfig base;
  std::vector<std::pair<std::string, ordered_json>> axes;
  ordered_json scalars = ordered_json::object();
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (it.value().is_array()) {
      if (it.value().empty()) throw Error("empty axis: " + it.key());
      axes.emplace_back(it.key(), it.value());
    } else {
      scalars[it.key()] = it.value();
    }
  }
  base = config_from_json(scalars, base);

  std::size_t cells = 1;
  for (const auto& [name, values] : axes) cells *= values.size();

  // Tables are regenerated only when a cell changes the storage layout.
  std::map<std::string, TableMeta> table_cache;
  auto table_for = [&](BenchConfig& cfg) -> const TableMeta& {
    std::ostringstream key;
    key << cfg.seed << "-" << cfg.scale << "-" << cfg.tuples_per_chunk << "-"
        << cfg.page_bytes;
    cfg.table_path = out_dir / ("table_" + key.str() + ".htsm");
    auto it = table_cache.find(key.str());
    if (it == table_cache.end()) {
      ChunkingConfig cc{cfg.tuples_per_chunk, cfg.page_bytes};
      GeneratedTable gen =
          generate_table(cfg.seed, cfg.scale, cc, cfg.table_path);
      it = table_cache.emplace(key.str(), std::move(gen.meta)).first;
    }
    return it->second;
  };

  std::ofstream csv(out_dir / "summary.csv");
  csv << "cell";
  for (const auto& [name, values] : axes) csv << "," << name;
  csv << ",request_count,bytes_read,sim_time,hit_ratio,error\n";

  for (std::size_t cell = 0; cell < cells; ++cell) {
    ordered_json cell_values = ordered_json::object();
    std::size_t rem = cell;
    for (const auto& [name, values] : axes) {
      const ordered_json& v = values.at(rem % values.size());
      rem /= values.size();
      cell_values[name] = v;
    }

    csv << cell;
    for (const auto& [name, values] : axes)
      csv << "," << csv_escape(json_scalar_to_csv(cell_values[name]));

    try {
      BenchConfig cfg = config_from_json(cell_values, base);
      const TableMeta& meta = table_for(cfg);
      ExperimentOutcome outcome = run_experiment(cfg, meta);
      ordered_json doc = outcome.to_metrics_json(cfg);

      char name[64];
      std::snprintf(name, sizeof(name), "cell_%04zu.json", cell);
      std::ofstream out(out_dir / name);
      out << doc.dump(2) << "\n";

      const auto& totals = doc.at("totals");
      csv << "," << totals.at("request_count").get<std::uint64_t>() << ","
          << totals.at("bytes_read").get<std::uint64_t>() << ","
          << totals.at("sim_time").get<double>() << ","
          << totals.at("hit_ratio").get<double>() << ",\n";
    } catch (const std::exception& e) {
      csv << ",,,," << csv_escape(e.what()) << "\n";
    }
  }
}

std::string render_report(const std::vector<std::filesystem::path>& inputs,
                          const std::string& format) {
  if (inputs.empty()) throw Error("report needs at least one metrics file");
  if (format != "text" && format != "csv")
    throw Error("unknown report format: " + format);

  struct Loaded {
    std::filesystem::path path;
    ordered_json doc;
  };
  std::vector<Loaded> runs;
  for (const auto& path : inputs)
    runs.push_back({path, load_metrics_file(path)});

  std::ostringstream os;
  if (format == "csv") {
    os << "file,mode,window,cache_fraction,device,request_count,bytes_read,"
          "sim_time,hit_ratio\n";
    for (const auto& run : runs) {
      const auto& cfg = run.doc.at("config");
      const auto& totals = run.doc.at("totals");
      os << csv_escape(run.path.filename().string()) << ","
         << cfg.at("mode").get<std::string>() << ","
         << cfg.at("window").get<std::uint64_t>() << ","
         << cfg.at("cache_fraction").get<double>() << ","
         << cfg.at("device").get<std::string>() << ","
         << totals.at("request_count").get<std::uint64_t>() << ","
         << totals.at("bytes_read").get<std::uint64_t>() << ","
         << totals.at("sim_time").get<double>() << ","
         << totals.at("hit_ratio").get<double>() << "\n";
    }
    os << "\ncumulative_time\nfile,batch,completion_index,sim_time\n";
    for (const auto& run : runs) {
      for (const auto& batch : run.doc.at("batches")) {
        std::map<std::uint64_t, double> by_index;
        for (const auto& q : require_field(batch, "queries"))
          by_index[q.at("completion_index").get<std::uint64_t>()] =
              q.at("sim_time_at_completion").get<double>();
        for (const auto& [idx, t] : by_index)
          os << csv_escape(run.path.filename().string()) << ","
             << batch.at("batch").get<std::uint64_t>() << "," << idx << ","
             << t << "\n";
      }
    }
    return os.str();
  }

  os << "run summary\n===========\n";
  for (const auto& run : runs) {
    const auto& cfg = run.doc.at("config");
    const auto& totals = run.doc.at("totals");
    os << run.path.filename().string() << ": mode="
       << cfg.at("mode").get<std::string>()
       << " window=" << cfg.at("window").get<std::uint64_t>()
       << " cache_fraction=" << cfg.at("cache_fraction").get<double>()
       << " device=" << cfg.at("device").get<std::string>() << "\n"
       << "  requests=" << totals.at("request_count").get<std::uint64_t>()
       << " bytes=" << totals.at("bytes_read").get<std::uint64_t>()
       << " sim_time=" << totals.at("sim_time").get<double>()
       << " hit_ratio=" << totals.at("hit_ratio").get<double>() << "\n";
  }

  os << "\ncumulative time by completion index\n";
  for (const auto& run : runs) {
    os << run.path.filename().string() << ":\n";
    for (const auto& batch : run.doc.at("batches")) {
      std::map<std::uint64_t, double> by_index;
      for (const auto& q : require_field(batch, "queries"))
        by_index[q.at("completion_index").get<std::uint64_t>()] =
            q.at("sim_time_at_completion").get<double>();
      os << "  batch " << batch.at("batch").get<std::uint64_t>() << ":";
      for (const auto& [idx, t] : by_index) os << " " << t;
      os << "\n";
    }
  }

  // Request count grouped by cache fraction, the axis of the eviction study.
  os << "\nrequest count by cache fraction\n";
  std::map<double, std::vector<std::pair<std::string, std::uint64_t>>>
      by_fraction;
  for (const auto& run : runs) {
    const double frac = run.doc.at("config").at("cache_fraction").get<double>();
    by_fraction[frac].emplace_back(
        run.doc.at("config").at("mode").get<std::string>(),
        run.doc.at("totals").at("request_count").get<std::uint64_t>());
  }
  for (const auto& [frac, rows] : by_fraction) {
    os << "  fraction " << (frac <= 0 ? std::string("unlimited")
                                      : std::to_string(frac));
    for (const auto& [mode, reqs] : rows) os << "  " << mode << "=" << reqs;
    os << "\n";
  }

  if (runs.size() == 2) {
    const auto r0 = runs[0].doc.at("totals").at("request_count")
                        .get<std::uint64_t>();
    const auto r1 = runs[1].doc.at("totals").at("request_count")
                        .get<std::uint64_t>();
    if (r0 > 0) {
      const double reduction =
          100.0 * (1.0 - static_cast<double>(r1) / static_cast<double>(r0));
      os << "\nI/O request delta (" << runs[1].path.filename().string()
         << " vs " << runs[0].path.filename().string() << "): " << reduction
         << "% reduction\n";
    }
  }
  return os.str();
}

}  // namespace htsm
