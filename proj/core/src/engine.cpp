#include "htsm/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>

namespace htsm {

namespace {

struct Tokenizer {
  explicit Tokenizer(const std::string& text) : s(text) {}

  std::string next() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) return "";
    const char c = s[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) ||
                              s[i] == '_'))
        ++i;
      return s.substr(start, i - start);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
        ((c == '-' || c == '+') && i + 1 < s.size() &&
         (std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          s[i + 1] == '.'))) {
      std::size_t start = i;
      ++i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) ||
                              s[i] == '.' || s[i] == '+' || s[i] == '-')) {
        // exponent sign only directly after e/E
        if ((s[i] == '+' || s[i] == '-') &&
            !(s[i - 1] == 'e' || s[i - 1] == 'E'))
          break;
        ++i;
      }
      return s.substr(start, i - start);
    }
    if (c == '>' && i + 1 < s.size() && s[i + 1] == '=') {
      i += 2;
      return ">=";
    }
    ++i;
    return std::string(1, c);
  }

  const std::string& s;
  std::size_t i = 0;
};

std::string upper(std::string v) {
  for (char& c : v) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return v;
}

bool is_identifier(const std::string& t) {
  if (t.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(t[0])) && t[0] != '_')
    return false;
  return true;
}

double parse_number(const std::string& t) {
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw Error("bad numeric literal: " + t);
    return v;
  } catch (const std::exception&) {
    throw Error("bad numeric literal: " + t);
  }
}

void expect(const std::string& got, const std::string& want) {
  if (upper(got) != want)
    throw Error("expected '" + want + "', got '" + got + "'");
}

inline double product_expr(double a, double b, double c) {
  return a * (1.0 - b) * (1.0 + c);
}

double decode_value(ColumnType type, std::span<const std::uint8_t> raw,
                    std::size_t row) {
  switch (type) {
    case ColumnType::Int64: {
      std::int64_t v;
      std::memcpy(&v, raw.data() + row * 8, 8);
      return static_cast<double>(v);
    }
    case ColumnType::Float64: {
      double v;
      std::memcpy(&v, raw.data() + row * 8, 8);
      return v;
    }
    case ColumnType::Date32: {
      std::int32_t v;
      std::memcpy(&v, raw.data() + row * 4, 4);
      return static_cast<double>(v);
    }
    case ColumnType::Str16:
      throw Error("string column in numeric context");
  }
  throw Error("bad column type");
}

}  // namespace

Query parse_query(const std::string& text) {
  Tokenizer tok(text);
  Query q;

  expect(tok.next(), "SELECT");
  const std::string fn = upper(tok.next());
  if (fn == "SUM") q.agg = AggFunc::Sum;
  else if (fn == "AVG") q.agg = AggFunc::Avg;
  else throw Error("unsupported aggregate: " + fn);

  expect(tok.next(), "(");
  const std::string first = tok.next();
  if (!is_identifier(first)) throw Error("expected column in aggregate");
  q.expr.col_a = first;

  std::string t = tok.next();
  if (t == "*") {
    // a * (1 - b) * (1 + c)
    q.expr.kind = AggExpr::Kind::Product;
    expect(tok.next(), "(");
    if (parse_number(tok.next()) != 1.0) throw Error("expected literal 1");
    expect(tok.next(), "-");
    q.expr.col_b = tok.next();
    if (!is_identifier(q.expr.col_b)) throw Error("expected column after '1 -'");
    expect(tok.next(), ")");
    expect(tok.next(), "*");
    expect(tok.next(), "(");
    if (parse_number(tok.next()) != 1.0) throw Error("expected literal 1");
    expect(tok.next(), "+");
    q.expr.col_c = tok.next();
    if (!is_identifier(q.expr.col_c)) throw Error("expected column after '1 +'");
    expect(tok.next(), ")");
    t = tok.next();
  }
  expect(t, ")");

  expect(tok.next(), "FROM");
  q.table = tok.next();
  if (!is_identifier(q.table)) throw Error("expected table name");

  t = tok.next();
  if (t.empty()) return q;
  expect(t, "WHERE");
  QueryFilter f;
  f.column = tok.next();
  if (!is_identifier(f.column)) throw Error("expected filter column");
  const std::string op = tok.next();
  if (op == ">=") f.op = FilterOp::Ge;
  else if (op == "<") f.op = FilterOp::Lt;
  else throw Error("unsupported filter operator: " + op);
  f.value = parse_number(tok.next());
  q.filter = f;

  const std::string tail = tok.next();
  if (!tail.empty()) throw Error("trailing input after query: " + tail);
  return q;
}

QueryPlan plan(const Query& query, const TableMeta& meta,
               std::uint32_t window_size) {
  if (window_size == 0) throw Error("window size must be >= 1");
  QueryPlan p;
  p.agg = query.agg;
  p.window_size = window_size;

  auto resolve_numeric = [&](const std::string& name) {
    const ColumnId id = meta.schema.column_index(name);
    const ColumnType t = meta.schema.columns[id].type;
    if (!column_type_is_numeric(t) && t != ColumnType::Date32)
      throw Error("column is not numeric: " + name);
    return id;
  };

  std::vector<ColumnId> cols;
  p.expr_a = resolve_numeric(query.expr.col_a);
  cols.push_back(p.expr_a);
  if (query.expr.kind == AggExpr::Kind::Product) {
    p.expr_is_product = true;
    p.expr_b = resolve_numeric(query.expr.col_b);
    p.expr_c = resolve_numeric(query.expr.col_c);
    cols.push_back(p.expr_b);
    cols.push_back(p.expr_c);
  }
  if (query.filter) {
    ScanFilter f;
    f.column = resolve_numeric(query.filter->column);
    f.op = query.filter->op;
    f.value = query.filter->value;
    p.filter = f;
    cols.push_back(f.column);
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  p.required_columns = std::move(cols);
  p.pruned_chunks = prune_chunks(meta, p.filter);
  return p;
}

std::span<const std::uint8_t> ChunkColumns::column(ColumnId id) const {
  for (const auto& [cid, span] : columns)
    if (cid == id) return span;
  throw Error("delivered chunk is missing column " + std::to_string(id));
}

void fold_chunk(AggState& state, const ChunkColumns& chunk,
                const QueryPlan& plan, const TableSchema& schema) {
  auto type_of = [&](ColumnId id) { return schema.columns.at(id).type; };

  const auto a_raw = chunk.column(plan.expr_a);
  const ColumnType a_type = type_of(plan.expr_a);
  std::span<const std::uint8_t> b_raw, c_raw, f_raw;
  ColumnType b_type{}, c_type{}, f_type{};
  if (plan.expr_is_product) {
    b_raw = chunk.column(plan.expr_b);
    c_raw = chunk.column(plan.expr_c);
    b_type = type_of(plan.expr_b);
    c_type = type_of(plan.expr_c);
  }
  if (plan.filter) {
    f_raw = chunk.column(plan.filter->column);
    f_type = type_of(plan.filter->column);
  }

  AggState::Partial& part = state.partials[chunk.chunk_id];
  for (std::uint64_t row = 0; row < chunk.tuple_count; ++row) {
    if (plan.filter) {
      const double v = decode_value(f_type, f_raw, row);
      const bool pass =
          plan.filter->op == FilterOp::Ge ? v >= plan.filter->value
                                          : v < plan.filter->value;
      if (!pass) continue;
    }
    double x = decode_value(a_type, a_raw, row);
    if (plan.expr_is_product)
      x = product_expr(x, decode_value(b_type, b_raw, row),
                       decode_value(c_type, c_raw, row));
    part.sum += x;
    part.count += 1;
  }
}

QueryResult finalize(const AggState& state, AggFunc agg) {
  double sum = 0.0;
  std::uint64_t count = 0;
  for (const auto& [chunk, part] : state.partials) {  // ascending chunk id
    sum += part.sum;
    count += part.count;
  }
  QueryResult r;
  r.matching_rows = count;
  if (agg == AggFunc::Sum) {
    r.value = count == 0 ? 0.0 : sum;
  } else {
    if (count == 0) r.value = std::nullopt;
    else r.value = sum / static_cast<double>(count);
  }
  return r;
}

QueryResult oracle_scan(const Query& query, const TableSchema& schema,
                        const TableData& data,
                        std::uint64_t tuples_per_chunk) {
  auto col_of = [&](const std::string& name) -> const ColumnData& {
    return data.columns.at(schema.column_index(name));
  };

  const ColumnData& a = col_of(query.expr.col_a);
  const ColumnData* b = nullptr;
  const ColumnData* c = nullptr;
  if (query.expr.kind == AggExpr::Kind::Product) {
    b = &col_of(query.expr.col_b);
    c = &col_of(query.expr.col_c);
  }
  const ColumnData* f =
      query.filter ? &col_of(query.filter->column) : nullptr;

  const std::uint64_t n = schema.tuple_count;
  const std::uint64_t chunks = chunk_count(n, tuples_per_chunk);

  double sum = 0.0;
  std::uint64_t count = 0;
  for (std::uint64_t ch = 0; ch < chunks; ++ch) {
    // Same per-chunk partial grouping as the engine fold.
    double part_sum = 0.0;
    std::uint64_t part_count = 0;
    const std::uint64_t begin = ch * tuples_per_chunk;
    const std::uint64_t end = std::min(n, begin + tuples_per_chunk);
    for (std::uint64_t row = begin; row < end; ++row) {
      if (f) {
        const double v = f->value_as_double(row);
        const bool pass = query.filter->op == FilterOp::Ge
                              ? v >= query.filter->value
                              : v < query.filter->value;
        if (!pass) continue;
      }
      double x = a.value_as_double(row);
      if (b) x = x * (1.0 - b->value_as_double(row)) *
                 (1.0 + c->value_as_double(row));
      part_sum += x;
      part_count += 1;
    }
    sum += part_sum;
    count += part_count;
  }

  QueryResult r;
  r.matching_rows = count;
  if (query.agg == AggFunc::Sum) r.value = count == 0 ? 0.0 : sum;
  else if (count == 0) r.value = std::nullopt;
  else r.value = sum / static_cast<double>(count);
  return r;
}

}  // namespace htsm
