#include "htsm/catalog.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace htsm {

namespace {

constexpr char kMagic[4] = {'H', 'T', 'S', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* p, std::size_t n) : p_(p), end_(p + n) {}

  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() { return read_le<std::uint16_t>(2); }
  std::uint32_t u32() { return read_le<std::uint32_t>(4); }
  std::uint64_t u64() { return read_le<std::uint64_t>(8); }
  void bytes(void* out, std::size_t n) { std::memcpy(out, take(n), n); }

 private:
  template <class T>
  T read_le(std::size_t n) {
    const std::uint8_t* b = take(n);
    T v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= T(b[i]) << (8 * i);
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (p_ + n > end_) throw Error("table header truncated");
    const std::uint8_t* r = p_;
    p_ += n;
    return r;
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

double decode_numeric(ColumnType type, const std::array<std::uint8_t, 16>& b) {
  switch (type) {
    case ColumnType::Int64: {
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
      return static_cast<double>(static_cast<std::int64_t>(u));
    }
    case ColumnType::Float64: {
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
      return std::bit_cast<double>(u);
    }
    case ColumnType::Date32: {
      std::uint32_t u = 0;
      for (int i = 0; i < 4; ++i) u |= std::uint32_t(b[i]) << (8 * i);
      return static_cast<double>(static_cast<std::int32_t>(u));
    }
    case ColumnType::Str16:
      return 0.0;
  }
  return 0.0;
}

struct UnitBounds {
  double num_min = 0.0, num_max = 0.0;
  Str16 str_min{}, str_max{};
};

UnitBounds unit_bounds(const ColumnData& col, std::size_t begin,
                       std::size_t end) {
  UnitBounds b;
  switch (col.type()) {
    case ColumnType::Int64: {
      const auto& v = col.int64();
      auto [mn, mx] = std::minmax_element(v.begin() + begin, v.begin() + end);
      b.num_min = static_cast<double>(*mn);
      b.num_max = static_cast<double>(*mx);
      break;
    }
    case ColumnType::Float64: {
      const auto& v = col.float64();
      auto [mn, mx] = std::minmax_element(v.begin() + begin, v.begin() + end);
      b.num_min = *mn;
      b.num_max = *mx;
      break;
    }
    case ColumnType::Date32: {
      const auto& v = col.date32();
      auto [mn, mx] = std::minmax_element(v.begin() + begin, v.begin() + end);
      b.num_min = static_cast<double>(*mn);
      b.num_max = static_cast<double>(*mx);
      break;
    }
    case ColumnType::Str16: {
      const auto& v = col.str16();
      auto [mn, mx] = std::minmax_element(v.begin() + begin, v.begin() + end);
      b.str_min = *mn;
      b.str_max = *mx;
      break;
    }
  }
  return b;
}

}  // namespace

ColumnId TableSchema::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return static_cast<ColumnId>(i);
  throw Error("unknown column: " + std::string(name));
}

bool TableSchema::has_column(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name) return true;
  return false;
}

void TableSchema::validate() const {
  if (columns.empty() || columns.size() > 256)
    throw Error("schema must have between 1 and 256 columns");
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (c.name.empty() || c.name.size() > 255)
      throw Error("column name length out of range");
    if (!names.insert(c.name).second)
      throw Error("duplicate column name: " + c.name);
  }
}

void ChunkingConfig::validate() const {
  if (tuples_per_chunk == 0) throw Error("tuples_per_chunk must be >= 1");
  if (!std::has_single_bit(page_bytes) || page_bytes < (1u << 12) ||
      page_bytes > (std::uint64_t(1) << 26))
    throw Error("page_bytes must be a power of two in [2^12, 2^26]");
}

std::uint64_t chunk_count(std::uint64_t tuple_count,
                          std::uint64_t tuples_per_chunk) {
  if (tuples_per_chunk == 0) throw Error("tuples_per_chunk must be >= 1");
  if (tuple_count == 0) return 0;
  return (tuple_count - 1) / tuples_per_chunk + 1;
}

std::uint64_t chunk_tuple_count(std::uint64_t tuple_count,
                                std::uint64_t tuples_per_chunk,
                                ChunkId chunk_id) {
  const std::uint64_t chunks = chunk_count(tuple_count, tuples_per_chunk);
  if (chunk_id >= chunks) throw Error("chunk id out of range");
  if (chunk_id + 1 < chunks) return tuples_per_chunk;
  return tuple_count - std::uint64_t(chunk_id) * tuples_per_chunk;
}

std::uint64_t align_up(std::uint64_t v, std::uint64_t alignment) {
  return (v + alignment - 1) / alignment * alignment;
}

void ChunkDirectory::add(const DataUnitKey& key, DirectoryEntry entry) {
  auto [it, inserted] = entries_.emplace(key, std::move(entry));
  if (!inserted) throw Error("duplicate directory key");
}

bool ChunkDirectory::contains(const DataUnitKey& key) const {
  return entries_.count(key) > 0;
}

const DirectoryEntry& ChunkDirectory::at(const DataUnitKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw Error("directory key not found: chunk " +
                std::to_string(key.chunk_id) + " column " +
                std::to_string(key.column_id));
  return it->second;
}

std::uint64_t TableMeta::total_data_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [key, entry] : directory.entries())
    total += entry.uncompressed_bytes;
  return total;
}

std::array<std::uint8_t, 16> encode_bound(ColumnType type, double numeric,
                                          const Str16* str) {
  std::array<std::uint8_t, 16> out{};
  switch (type) {
    case ColumnType::Int64: {
      auto v = static_cast<std::int64_t>(numeric);
      auto u = static_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) out[i] = std::uint8_t(u >> (8 * i));
      break;
    }
    case ColumnType::Float64: {
      auto u = std::bit_cast<std::uint64_t>(numeric);
      for (int i = 0; i < 8; ++i) out[i] = std::uint8_t(u >> (8 * i));
      break;
    }
    case ColumnType::Date32: {
      auto v = static_cast<std::int32_t>(numeric);
      auto u = static_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out[i] = std::uint8_t(u >> (8 * i));
      break;
    }
    case ColumnType::Str16: {
      if (str)
        std::memcpy(out.data(), str->data(), 16);
      break;
    }
  }
  return out;
}

TableMeta write_table(const TableSchema& schema, const ChunkingConfig& config,
                      const TableData& data,
                      const std::filesystem::path& path) {
  schema.validate();
  config.validate();
  if (data.columns.size() != schema.columns.size())
    throw Error("column stream count does not match schema");
  for (std::size_t i = 0; i < data.columns.size(); ++i) {
    if (data.columns[i].type() != schema.columns[i].type)
      throw Error("column stream type mismatch for " + schema.columns[i].name);
    if (data.columns[i].size() != schema.tuple_count)
      throw Error("column stream short for " + schema.columns[i].name);
  }

  const std::uint64_t chunks =
      chunk_count(schema.tuple_count, config.tuples_per_chunk);
  const std::uint64_t page = config.page_bytes;

  // Header with a directory entry per (chunk, column), ascending.
  ByteWriter header;
  header.bytes(kMagic, 4);
  header.u32(kFormatVersion);
  header.u16(static_cast<std::uint16_t>(schema.columns.size()));
  for (const auto& col : schema.columns) {
    header.u8(static_cast<std::uint8_t>(col.type));
    header.u8(static_cast<std::uint8_t>(col.name.size()));
    header.bytes(col.name.data(), col.name.size());
  }
  header.u64(schema.tuple_count);
  header.u64(config.tuples_per_chunk);
  header.u64(page);
  header.u32(static_cast<std::uint32_t>(chunks * schema.columns.size()));

  const std::size_t fixed_header =
      header.size() + chunks * schema.columns.size() * (4 + 2 + 8 + 8 + 16 + 16);

  TableMeta meta{schema, config, {}};
  std::uint64_t cursor = align_up(fixed_header, page);

  struct PendingSegment {
    std::uint64_t offset;
    std::vector<std::uint8_t> bytes;
  };
  std::vector<PendingSegment> segments;

  for (ChunkId c = 0; c < chunks; ++c) {
    const std::size_t begin = std::size_t(c) * config.tuples_per_chunk;
    const std::size_t end =
        begin + chunk_tuple_count(schema.tuple_count, config.tuples_per_chunk, c);
    for (ColumnId j = 0; j < schema.columns.size(); ++j) {
      const ColumnData& col = data.columns[j];
      std::vector<std::uint8_t> raw = col.raw_bytes(begin, end);
      const std::uint64_t len = raw.size();

      DirectoryEntry entry;
      entry.uncompressed_bytes = len;
      for (std::uint64_t p = 0; p < align_up(len, page); p += page)
        entry.extents.push_back(Extent{0, cursor + p, page});

      const UnitBounds ub = unit_bounds(col, begin, end);
      const ColumnType t = schema.columns[j].type;
      entry.zone.min_encoded = encode_bound(t, ub.num_min, &ub.str_min);
      entry.zone.max_encoded = encode_bound(t, ub.num_max, &ub.str_max);
      entry.zone.min_value = ub.num_min;
      entry.zone.max_value = ub.num_max;

      meta.directory.add(DataUnitKey{c, j}, std::move(entry));
      segments.push_back({cursor, std::move(raw)});
      cursor = align_up(cursor + len, page);
    }
  }

  for (const auto& [key, entry] : meta.directory.entries()) {
    header.u32(key.chunk_id);
    header.u16(key.column_id);
    header.u64(entry.extents.front().offset);
    header.u64(entry.uncompressed_bytes);
    header.bytes(entry.zone.min_encoded.data(), 16);
    header.bytes(entry.zone.max_encoded.data(), 16);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(header.data().data()),
            static_cast<std::streamsize>(header.size()));
  for (const auto& seg : segments) {
    out.seekp(static_cast<std::streamoff>(seg.offset));
    out.write(reinterpret_cast<const char*>(seg.bytes.data()),
              static_cast<std::streamsize>(seg.bytes.size()));
  }
  // Pad to the final page boundary so whole-page reads never run short. The
  // pad byte may only land past the written data, never on it.
  const std::uint64_t data_end =
      segments.empty() ? fixed_header
                       : segments.back().offset + segments.back().bytes.size();
  if (cursor > data_end) {
    out.seekp(static_cast<std::streamoff>(cursor - 1));
    out.put('\0');
  }
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
  return meta;
}

TableMeta open_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open table: " + path.string());
  std::vector<std::uint8_t> head(1 << 16);
  in.read(reinterpret_cast<char*>(head.data()),
          static_cast<std::streamsize>(head.size()));
  auto got = static_cast<std::size_t>(in.gcount());

  // Two passes: probe 64 KiB first, re-read the full file when a large
  // directory truncates the parse.
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      ByteReader r(head.data(), got < head.size() ? got : head.size());
      char magic[4];
      r.bytes(magic, 4);
      if (std::memcmp(magic, kMagic, 4) != 0)
        throw Error("bad magic: not a table file");
      const std::uint32_t version = r.u32();
      if (version != kFormatVersion)
        throw Error("unsupported format version " + std::to_string(version));

      TableMeta meta;
      const std::uint16_t ncols = r.u16();
      for (std::uint16_t i = 0; i < ncols; ++i) {
        ColumnSpec spec;
        spec.type = static_cast<ColumnType>(r.u8());
        column_type_width(spec.type);  // validates the tag
        const std::uint8_t name_len = r.u8();
        spec.name.resize(name_len);
        r.bytes(spec.name.data(), name_len);
        meta.schema.columns.push_back(std::move(spec));
      }
      meta.schema.tuple_count = r.u64();
      meta.config.tuples_per_chunk = r.u64();
      meta.config.page_bytes = r.u64();
      meta.schema.validate();
      meta.config.validate();

      const std::uint32_t entry_count = r.u32();
      for (std::uint32_t i = 0; i < entry_count; ++i) {
        DataUnitKey key;
        key.chunk_id = r.u32();
        key.column_id = r.u16();
        DirectoryEntry entry;
        const std::uint64_t offset = r.u64();
        entry.uncompressed_bytes = r.u64();
        r.bytes(entry.zone.min_encoded.data(), 16);
        r.bytes(entry.zone.max_encoded.data(), 16);
        const ColumnType t = meta.schema.columns.at(key.column_id).type;
        entry.zone.min_value = decode_numeric(t, entry.zone.min_encoded);
        entry.zone.max_value = decode_numeric(t, entry.zone.max_encoded);
        const std::uint64_t page = meta.config.page_bytes;
        for (std::uint64_t p = 0; p < align_up(entry.uncompressed_bytes, page);
             p += page)
          entry.extents.push_back(Extent{0, offset + p, page});
        meta.directory.add(key, std::move(entry));
      }
      return meta;
    } catch (const Error&) {
      if (attempt == 1 || got < head.size()) throw;
      // Header larger than the probe buffer: load the whole file head.
      in.clear();
      in.seekg(0);
      const auto size = std::filesystem::file_size(path);
      head.resize(size);
      in.read(reinterpret_cast<char*>(head.data()),
              static_cast<std::streamsize>(head.size()));
      got = static_cast<std::size_t>(in.gcount());
    }
  }
  throw Error("unreachable");
}

const std::vector<Extent>& lookup_extents(const ChunkDirectory& dir,
                                          const DataUnitKey& key) {
  return dir.at(key).extents;
}

std::vector<ChunkId> prune_chunks(const TableMeta& meta,
                                  const std::optional<ScanFilter>& filter) {
  const std::uint64_t chunks = meta.chunks();
  std::vector<ChunkId> out;
  if (!filter) {
    out.reserve(chunks);
    for (ChunkId c = 0; c < chunks; ++c) out.push_back(c);
    return out;
  }
  if (filter->column >= meta.schema.columns.size())
    throw Error("filter column out of range");
  if (!column_type_is_numeric(meta.schema.columns[filter->column].type) &&
      meta.schema.columns[filter->column].type != ColumnType::Date32)
    throw Error("filter column must be numeric");

  for (ChunkId c = 0; c < chunks; ++c) {
    const ZoneMap& zone =
        meta.directory.at(DataUnitKey{c, filter->column}).zone;
    const bool keep = filter->op == FilterOp::Ge
                          ? zone.max_value >= filter->value
                          : zone.min_value < filter->value;
    if (keep) out.push_back(c);
  }
  return out;
}

std::vector<std::uint8_t> ColumnData::raw_bytes(std::size_t begin,
                                                std::size_t end) const {
  std::vector<std::uint8_t> out;
  const std::size_t n = end - begin;
  switch (data_.index()) {
    case 0: {
      out.resize(n * 8);
      std::memcpy(out.data(), int64().data() + begin, n * 8);
      break;
    }
    case 1: {
      out.resize(n * 8);
      std::memcpy(out.data(), float64().data() + begin, n * 8);
      break;
    }
    case 2: {
      out.resize(n * 4);
      std::memcpy(out.data(), date32().data() + begin, n * 4);
      break;
    }
    default: {
      out.resize(n * 16);
      std::memcpy(out.data(), str16().data() + begin, n * 16);
      break;
    }
  }
  return out;
}

}  // namespace htsm
