#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emuspmv {

using Index = std::uint64_t;
using DenseVector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input violates a structural invariant (bad CSR arrays,
/// inconsistent symmetric input, ...).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CooEntry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const CooEntry&, const CooEntry&) = default;
};

struct CooMatrix {
  Index num_rows = 0;
  Index num_cols = 0;
  std::vector<CooEntry> entries;

  void validate() const {
    for (const auto& e : entries) {
      if (e.row >= num_rows || e.col >= num_cols) {
        throw IntegrityError("COO entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                             ") outside " + std::to_string(num_rows) + "x" + std::to_string(num_cols));
      }
    }
  }

  friend bool operator==(const CooMatrix&, const CooMatrix&) = default;
};

struct CsrMatrix {
  Index num_rows = 0;
  Index num_cols = 0;
  std::vector<Index> row_ptr{0};
  std::vector<Index> col_index;
  std::vector<double> values;

  Index nnz() const { return static_cast<Index>(col_index.size()); }
  Index row_nnz(Index r) const { return row_ptr[r + 1] - row_ptr[r]; }
  bool square() const { return num_rows == num_cols; }

  /// Throws IntegrityError unless the canonical CSR invariants hold:
  /// row_ptr starts at 0, is non-decreasing and ends at nnz; columns are in
  /// range and strictly increasing within each row.
  void validate() const {
    if (row_ptr.size() != num_rows + 1) throw IntegrityError("row_ptr length must be num_rows + 1");
    if (values.size() != col_index.size()) throw IntegrityError("values and col_index differ in length");
    if (row_ptr.front() != 0) throw IntegrityError("row_ptr[0] must be 0");
    if (row_ptr.back() != nnz()) throw IntegrityError("row_ptr[num_rows] must equal nnz");
    for (Index r = 0; r < num_rows; ++r) {
      if (row_ptr[r] > row_ptr[r + 1]) throw IntegrityError("row_ptr decreases at row " + std::to_string(r));
      for (Index j = row_ptr[r]; j < row_ptr[r + 1]; ++j) {
        if (col_index[j] >= num_cols) throw IntegrityError("column out of range in row " + std::to_string(r));
        if (j > row_ptr[r] && col_index[j] <= col_index[j - 1]) {
          throw IntegrityError("columns not strictly increasing in row " + std::to_string(r));
        }
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

/// Sort by (row, col) and sum duplicates into canonical CSR.
inline CsrMatrix coo_to_csr(const CooMatrix& m) {
  m.validate();
  std::vector<CooEntry> sorted = m.entries;
  std::stable_sort(sorted.begin(), sorted.end(), [](const CooEntry& a, const CooEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  CsrMatrix out;
  out.num_rows = m.num_rows;
  out.num_cols = m.num_cols;
  out.row_ptr.assign(m.num_rows + 1, 0);
  out.col_index.reserve(sorted.size());
  out.values.reserve(sorted.size());

  for (std::size_t i = 0; i < sorted.size();) {
    const Index row = sorted[i].row;
    const Index col = sorted[i].col;
    double sum = 0.0;
    for (; i < sorted.size() && sorted[i].row == row && sorted[i].col == col; ++i) sum += sorted[i].value;
    out.col_index.push_back(col);
    out.values.push_back(sum);
    ++out.row_ptr[row + 1];
  }
  for (Index r = 0; r < m.num_rows; ++r) out.row_ptr[r + 1] += out.row_ptr[r];
  out.validate();
  return out;
}

inline CooMatrix csr_to_coo(const CsrMatrix& m) {
  CooMatrix out{m.num_rows, m.num_cols, {}};
  out.entries.reserve(m.nnz());
  for (Index r = 0; r < m.num_rows; ++r) {
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) out.entries.push_back({r, m.col_index[j], m.values[j]});
  }
  return out;
}

/// Mirror the stored triangle of a symmetric matrix so the full matrix is
/// held explicitly. Diagonal entries are kept once. A no-op unless
/// declared_symmetric is set.
inline CooMatrix expand_symmetric(const CooMatrix& m, bool declared_symmetric) {
  if (!declared_symmetric) return m;
  if (m.num_rows != m.num_cols) throw DimensionError("symmetric matrix must be square");

  // Both (i,j) and (j,i) may already be present; they must agree.
  std::vector<CooEntry> sorted = m.entries;
  std::sort(sorted.begin(), sorted.end(), [](const CooEntry& a, const CooEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  auto find = [&](Index r, Index c) -> const CooEntry* {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), CooEntry{r, c, 0.0},
                               [](const CooEntry& a, const CooEntry& b) {
                                 return a.row != b.row ? a.row < b.row : a.col < b.col;
                               });
    return (it != sorted.end() && it->row == r && it->col == c) ? &*it : nullptr;
  };

  CooMatrix out{m.num_rows, m.num_cols, {}};
  out.entries.reserve(m.entries.size() * 2);
  for (const auto& e : m.entries) {
    out.entries.push_back(e);
    if (e.row == e.col) continue;
    if (const CooEntry* mirror = find(e.col, e.row)) {
      if (mirror->value != e.value) {
        throw IntegrityError("symmetric input holds (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                             ") and its mirror with different values");
      }
      continue;  // mirror is stored explicitly and will be emitted on its own
    }
    out.entries.push_back({e.col, e.row, e.value});
  }
  return out;
}

/// b = A x, accumulating each row in ascending storage order.
inline DenseVector spmv_reference(const CsrMatrix& m, std::span<const double> x) {
  if (x.size() != m.num_cols) {
    throw DimensionError("x has length " + std::to_string(x.size()) + ", matrix has " +
                         std::to_string(m.num_cols) + " columns");
  }
  DenseVector b(m.num_rows, 0.0);
  for (Index r = 0; r < m.num_rows; ++r) {
    double sum = 0.0;
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) sum += m.values[j] * x[m.col_index[j]];
    b[r] = sum;
  }
  return b;
}

}  // namespace emuspmv
