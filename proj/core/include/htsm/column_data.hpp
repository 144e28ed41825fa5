#pragma once

#include <cstdint>
#include <cstring>
#include <variant>
#include <vector>

#include "htsm/schema.hpp"
#include "htsm/types.hpp"

namespace htsm {

/// In-memory column values, one alternative per supported type.
class ColumnData {
 public:
  using Storage = std::variant<std::vector<std::int64_t>, std::vector<double>,
                               std::vector<std::int32_t>, std::vector<Str16>>;

  ColumnData() = default;
  explicit ColumnData(std::vector<std::int64_t> v) : data_(std::move(v)) {}
  explicit ColumnData(std::vector<double> v) : data_(std::move(v)) {}
  explicit ColumnData(std::vector<std::int32_t> v) : data_(std::move(v)) {}
  explicit ColumnData(std::vector<Str16> v) : data_(std::move(v)) {}

  ColumnType type() const {
    switch (data_.index()) {
      case 0: return ColumnType::Int64;
      case 1: return ColumnType::Float64;
      case 2: return ColumnType::Date32;
      default: return ColumnType::Str16;
    }
  }

  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, data_);
  }

  const std::vector<std::int64_t>& int64() const {
    return std::get<std::vector<std::int64_t>>(data_);
  }
  const std::vector<double>& float64() const {
    return std::get<std::vector<double>>(data_);
  }
  const std::vector<std::int32_t>& date32() const {
    return std::get<std::vector<std::int32_t>>(data_);
  }
  const std::vector<Str16>& str16() const {
    return std::get<std::vector<Str16>>(data_);
  }

  /// Value as double for numeric evaluation (int64/float64/date32).
  double value_as_double(std::size_t row) const {
    switch (data_.index()) {
      case 0: return static_cast<double>(int64()[row]);
      case 1: return float64()[row];
      case 2: return static_cast<double>(date32()[row]);
      default: throw Error("string column has no numeric value");
    }
  }

  /// Raw little-endian bytes of rows [begin, end); the on-disk segment image.
  std::vector<std::uint8_t> raw_bytes(std::size_t begin, std::size_t end) const;

 private:
  Storage data_;
};

/// Full in-memory table: one ColumnData per schema column. Serves as the
/// generator's reference copy for oracle scans.
struct TableData {
  std::vector<ColumnData> columns;

  std::size_t tuple_count() const {
    return columns.empty() ? 0 : columns.front().size();
  }
};

}  // namespace htsm
