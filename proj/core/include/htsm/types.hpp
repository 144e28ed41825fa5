#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace htsm {

using ChunkId = std::uint32_t;
using ColumnId = std::uint16_t;
using QueryId = std::uint32_t;

/// Generic failure carrying a human-readable diagnostic. Thrown for I/O
/// errors, malformed files, bad configuration and contract violations that
/// callers are expected to surface rather than recover from.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Identifies one column of one chunk: the directory, cache and reference
/// counting granularity.
struct DataUnitKey {
  ChunkId chunk_id = 0;
  ColumnId column_id = 0;

  friend bool operator==(const DataUnitKey&, const DataUnitKey&) = default;
  friend auto operator<=>(const DataUnitKey&, const DataUnitKey&) = default;
};

struct DataUnitKeyHash {
  std::size_t operator()(const DataUnitKey& k) const noexcept {
    // chunk/column fit comfortably in 48 bits; splitmix the packed value.
    std::uint64_t x = (std::uint64_t(k.chunk_id) << 16) | k.column_id;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return static_cast<std::size_t>(x);
  }
};

enum class ColumnType : std::uint8_t {
  Int64 = 0,
  Float64 = 1,
  Date32 = 2,
  Str16 = 3,
};

/// Fixed 16-byte, zero-padded string value.
using Str16 = std::array<char, 16>;

inline Str16 make_str16(std::string_view s) {
  Str16 out{};
  const std::size_t len = s.size() < 16 ? s.size() : 16;
  for (std::size_t i = 0; i < len; ++i) out[i] = s[i];
  return out;
}

inline std::size_t column_type_width(ColumnType t) {
  switch (t) {
    case ColumnType::Int64: return 8;
    case ColumnType::Float64: return 8;
    case ColumnType::Date32: return 4;
    case ColumnType::Str16: return 16;
  }
  throw Error("unknown column type tag");
}

inline const char* column_type_name(ColumnType t) {
  switch (t) {
    case ColumnType::Int64: return "int64";
    case ColumnType::Float64: return "float64";
    case ColumnType::Date32: return "date32";
    case ColumnType::Str16: return "str16";
  }
  return "?";
}

inline bool column_type_is_numeric(ColumnType t) {
  return t == ColumnType::Int64 || t == ColumnType::Float64;
}

}  // namespace htsm
