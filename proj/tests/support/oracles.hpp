#pragma once

// Independent reference computations used to check the library. They share
// no code with it beyond the plain data types.

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "emuspmv/sparse.hpp"

namespace oracles {

using emuspmv::CsrMatrix;
using emuspmv::Index;

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const CsrMatrix& m) {
  Dense d(m.num_rows, std::vector<double>(m.num_cols, 0.0));
  for (Index r = 0; r < m.num_rows; ++r) {
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) d[r][m.col_index[j]] += m.values[j];
  }
  return d;
}

/// Row-major dense product, skipping structural zeros in column order.
inline std::vector<double> dense_multiply(const Dense& a, const std::vector<double>& x) {
  std::vector<double> b(a.size(), 0.0);
  for (std::size_t r = 0; r < a.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      if (a[r][c] != 0.0) s += a[r][c] * x[c];
    }
    b[r] = s;
  }
  return b;
}

/// Entry map keyed by (row, col).
inline std::map<std::pair<Index, Index>, double> entry_map(const CsrMatrix& m) {
  std::map<std::pair<Index, Index>, double> out;
  for (Index r = 0; r < m.num_rows; ++r) {
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) out[{r, m.col_index[j]}] = m.values[j];
  }
  return out;
}

inline Index brute_bandwidth(const CsrMatrix& m) {
  Index bw = 0;
  for (const auto& [rc, v] : entry_map(m)) {
    (void)v;
    const auto [r, c] = rc;
    const Index d = r > c ? r - c : c - r;
    if (d > bw) bw = d;
  }
  return bw;
}

/// Two-pass population coefficient of variation.
inline double population_cv(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return std::sqrt(var) / mean;
}

inline bool relative_close(double a, double b, double tol) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

}  // namespace oracles
