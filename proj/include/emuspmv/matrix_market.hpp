#pragma once

// Matrix Market coordinate format (real | integer | pattern, general | symmetric).
// Indices are 1-based on disk and 0-based in memory.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "emuspmv/sparse.hpp"

namespace emuspmv {

class ParseError : public std::runtime_error {
 public:
  enum class Kind { MalformedHeader, MalformedSizeLine, MalformedEntry, IndexOutOfBounds, NonNumericValue, Truncated, Io };

  ParseError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

enum class MmField { Real, Integer, Pattern };

struct MatrixMarketData {
  CooMatrix matrix;
  MmField field = MmField::Real;
  bool symmetric = false;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

inline std::optional<Index> parse_index(std::string_view tok) {
  Index v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_integer_value(std::string_view tok) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return static_cast<double>(v);
}

inline std::optional<double> parse_real(std::string_view tok) {
  std::string buf(tok);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline MatrixMarketData parse_matrix_market(std::istream& in) {
  using K = ParseError::Kind;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(K::Truncated, 1, "empty input, expected %%MatrixMarket header");
  ++line_no;
  const auto header = detail::split_ws(line);
  if (header.size() != 5 || header[0] != "%%MatrixMarket") {
    throw ParseError(K::MalformedHeader, line_no, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'");
  }
  if (detail::lower(header[1]) != "matrix" || detail::lower(header[2]) != "coordinate") {
    throw ParseError(K::MalformedHeader, line_no, "only 'matrix coordinate' bodies are supported");
  }

  MatrixMarketData data;
  const std::string field = detail::lower(header[3]);
  if (field == "real") {
    data.field = MmField::Real;
  } else if (field == "integer") {
    data.field = MmField::Integer;
  } else if (field == "pattern") {
    data.field = MmField::Pattern;
  } else {
    throw ParseError(K::MalformedHeader, line_no, "unsupported field '" + std::string(header[3]) + "'");
  }
  const std::string symmetry = detail::lower(header[4]);
  if (symmetry == "general") {
    data.symmetric = false;
  } else if (symmetry == "symmetric") {
    data.symmetric = true;
  } else {
    throw ParseError(K::MalformedHeader, line_no, "unsupported symmetry '" + std::string(header[4]) + "'");
  }

  // comments and blank lines precede the size line
  bool have_size = false;
  Index declared_nnz = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3) throw ParseError(K::MalformedSizeLine, line_no, "size line must hold 'rows cols nnz'");
    auto r = detail::parse_index(tok[0]);
    auto c = detail::parse_index(tok[1]);
    auto n = detail::parse_index(tok[2]);
    if (!r || !c || !n) throw ParseError(K::MalformedSizeLine, line_no, "size line must hold three integers");
    data.matrix.num_rows = *r;
    data.matrix.num_cols = *c;
    declared_nnz = *n;
    have_size = true;
    break;
  }
  if (!have_size) throw ParseError(K::Truncated, line_no + 1, "missing size line");
  if (data.symmetric && data.matrix.num_rows != data.matrix.num_cols) {
    throw ParseError(K::MalformedSizeLine, line_no, "symmetric matrix must be square");
  }

  const std::size_t expected_tokens = data.field == MmField::Pattern ? 2 : 3;
  data.matrix.entries.reserve(declared_nnz);
  while (data.matrix.entries.size() < declared_nnz && std::getline(in, line)) {
    ++line_no;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '%') continue;
    if (tok.size() != expected_tokens) {
      throw ParseError(K::MalformedEntry, line_no,
                       "expected " + std::to_string(expected_tokens) + " fields, found " + std::to_string(tok.size()));
    }
    auto r = detail::parse_index(tok[0]);
    auto c = detail::parse_index(tok[1]);
    if (!r || !c) throw ParseError(K::NonNumericValue, line_no, "non-integer index");
    if (*r < 1 || *r > data.matrix.num_rows) {
      throw ParseError(K::IndexOutOfBounds, line_no, "row index " + std::to_string(*r) + " out of bounds");
    }
    if (*c < 1 || *c > data.matrix.num_cols) {
      throw ParseError(K::IndexOutOfBounds, line_no, "column index " + std::to_string(*c) + " out of bounds");
    }
    double value = 1.0;
    if (data.field != MmField::Pattern) {
      const std::optional<double> v =
          data.field == MmField::Integer ? detail::parse_integer_value(tok[2]) : detail::parse_real(tok[2]);
      if (!v) throw ParseError(K::NonNumericValue, line_no, "non-numeric value '" + std::string(tok[2]) + "'");
      value = *v;
    }
    data.matrix.entries.push_back({*r - 1, *c - 1, value});
  }
  if (data.matrix.entries.size() < declared_nnz) {
    throw ParseError(K::Truncated, line_no + 1,
                     "file ends after " + std::to_string(data.matrix.entries.size()) + " of " +
                         std::to_string(declared_nnz) + " entries");
  }
  return data;
}

inline MatrixMarketData parse_matrix_market(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_matrix_market(in);
}

inline MatrixMarketData read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::Io, 0, "cannot open '" + path + "'");
  return parse_matrix_market(in);
}

/// Writes a general real coordinate file (full precision).
inline void write_matrix_market(std::ostream& out, const CsrMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.num_rows << ' ' << m.num_cols << ' ' << m.nnz() << '\n';
  out.precision(17);
  for (Index r = 0; r < m.num_rows; ++r) {
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) {
      out << r + 1 << ' ' << m.col_index[j] + 1 << ' ' << m.values[j] << '\n';
    }
  }
}

}  // namespace emuspmv
