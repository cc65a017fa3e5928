#pragma once

// Placement of A, x and b across nodelets: vector ownership maps, per-thread
// row assignments and the per-nodelet mini-CSR shards.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "emuspmv/sparse.hpp"

namespace emuspmv {

using Nodelet = std::uint32_t;

inline Index ceil_div(Index a, Index b) { return b == 0 ? 0 : (a + b - 1) / b; }

enum class LayoutKind { Cyclic, Block };

inline std::string_view to_string(LayoutKind k) { return k == LayoutKind::Cyclic ? "cyclic" : "block"; }

inline LayoutKind parse_layout(std::string_view s) {
  if (s == "cyclic") return LayoutKind::Cyclic;
  if (s == "block") return LayoutKind::Block;
  throw std::invalid_argument("unknown layout '" + std::string(s) + "' (expected cyclic|block)");
}

class VectorLayout {
 public:
  VectorLayout(LayoutKind kind, Index length, Nodelet nodelets)
      : kind_(kind), length_(length), nodelets_(nodelets), block_size_(std::max<Index>(1, ceil_div(length, nodelets))) {
    if (nodelets == 0) throw std::invalid_argument("layout needs at least one nodelet");
  }

  LayoutKind kind() const { return kind_; }
  Index length() const { return length_; }
  Nodelet nodelets() const { return nodelets_; }
  Index block_size() const { return block_size_; }

  Nodelet owner(Index i) const {
    return kind_ == LayoutKind::Cyclic ? static_cast<Nodelet>(i % nodelets_) : static_cast<Nodelet>(i / block_size_);
  }

 private:
  LayoutKind kind_;
  Index length_;
  Nodelet nodelets_;
  Index block_size_;
};

struct RowRange {
  Index first = 0;
  Index last = 0;

  Index size() const { return last - first; }
  bool empty() const { return first == last; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

enum class Distribution { Row, Nnz };

inline std::string_view to_string(Distribution d) { return d == Distribution::Row ? "row" : "nnz"; }

inline Distribution parse_distribution(std::string_view s) {
  if (s == "row") return Distribution::Row;
  if (s == "nnz") return Distribution::Nnz;
  throw std::invalid_argument("unknown distribution '" + std::string(s) + "' (expected row|nnz)");
}

/// Thread t of nodelet k is thread_rows[k * threads_per_nodelet + t]. The
/// ranges of a nodelet's threads are consecutive, so nodelet k owns
/// [nodelet_first_row[k], nodelet_first_row[k + 1]).
struct WorkAssignment {
  Nodelet nodelets = 1;
  Index threads_per_nodelet = 1;
  std::vector<RowRange> thread_rows;
  std::vector<Index> nodelet_first_row;  // nodelets + 1 entries

  const RowRange& rows(Nodelet k, Index t) const { return thread_rows[k * threads_per_nodelet + t]; }
  RowRange nodelet_rows(Nodelet k) const { return {nodelet_first_row[k], nodelet_first_row[k + 1]}; }
  Index total_threads() const { return nodelets * threads_per_nodelet; }
  Index num_rows() const { return nodelet_first_row.back(); }
};

namespace detail {

inline void check_counts(Nodelet nodelets, Index threads) {
  if (nodelets < 1) throw std::invalid_argument("need at least one nodelet");
  if (threads < 1) throw std::invalid_argument("need at least one thread per nodelet");
}

inline void fill_nodelet_bounds(WorkAssignment& a) {
  a.nodelet_first_row.resize(a.nodelets + 1);
  for (Nodelet k = 0; k < a.nodelets; ++k) a.nodelet_first_row[k] = a.rows(k, 0).first;
  a.nodelet_first_row[a.nodelets] = a.thread_rows.back().last;
}

}  // namespace detail

/// Nodelet k owns rows [k*c, min((k+1)*c, M)) with c = ceil(M / nodelets);
/// each nodelet's block is split over its threads by the same ceiling rule.
inline WorkAssignment distribute_rows_even(const CsrMatrix& m, Nodelet nodelets, Index threads_per_nodelet) {
  detail::check_counts(nodelets, threads_per_nodelet);
  const Index rows = m.num_rows;
  const Index per_nodelet = ceil_div(rows, nodelets);
  WorkAssignment a{nodelets, threads_per_nodelet, {}, {}};
  a.thread_rows.reserve(a.total_threads());
  for (Nodelet k = 0; k < nodelets; ++k) {
    const Index first = std::min(rows, k * per_nodelet);
    const Index last = std::min(rows, (k + 1) * per_nodelet);
    const Index per_thread = ceil_div(last - first, threads_per_nodelet);
    for (Index t = 0; t < threads_per_nodelet; ++t) {
      a.thread_rows.push_back({std::min(last, first + t * per_thread), std::min(last, first + (t + 1) * per_thread)});
    }
  }
  detail::fill_nodelet_bounds(a);
  return a;
}

/// Greedy walk over rows: a thread takes rows until its non-zero count reaches
/// ceil(NNZ / total_threads), then the next thread (nodelet-major order)
/// starts. Rows are never split; the last thread takes whatever remains.
inline WorkAssignment distribute_by_nnz(const CsrMatrix& m, Nodelet nodelets, Index threads_per_nodelet) {
  detail::check_counts(nodelets, threads_per_nodelet);
  if (m.nnz() == 0) return distribute_rows_even(m, nodelets, threads_per_nodelet);

  WorkAssignment a{nodelets, threads_per_nodelet, {}, {}};
  const Index total = a.total_threads();
  const Index threshold = ceil_div(m.nnz(), total);
  a.thread_rows.reserve(total);

  Index row = 0;
  for (Index t = 0; t < total; ++t) {
    const Index first = row;
    if (t + 1 == total) {
      row = m.num_rows;
    } else {
      Index acc = 0;
      while (row < m.num_rows && acc < threshold) acc += m.row_nnz(row++);
    }
    a.thread_rows.push_back({first, row});
  }
  detail::fill_nodelet_bounds(a);
  return a;
}

inline WorkAssignment distribute(const CsrMatrix& m, Distribution d, Nodelet nodelets, Index threads_per_nodelet) {
  return d == Distribution::Row ? distribute_rows_even(m, nodelets, threads_per_nodelet)
                                : distribute_by_nnz(m, nodelets, threads_per_nodelet);
}

/// A nodelet's slice of the global CSR with row offsets relative to the shard.
struct CsrShard {
  Index first_row = 0;  // absolute index of the shard's first row
  std::vector<Index> row_ptr{0};
  std::vector<Index> col_index;
  std::vector<double> values;

  Index num_rows() const { return static_cast<Index>(row_ptr.size()) - 1; }
};

struct DistributedPlan {
  Index num_rows = 0;
  Index num_cols = 0;
  std::vector<CsrShard> shards;
  WorkAssignment assignment;
  VectorLayout x_layout;
  VectorLayout b_layout;

  Nodelet nodelets() const { return assignment.nodelets; }
  Index nnz() const {
    Index n = 0;
    for (const auto& s : shards) n += s.col_index.size();
    return n;
  }

  /// Concatenate the shards back into one global CSR matrix.
  CsrMatrix reconstruct() const {
    CsrMatrix m;
    m.num_rows = num_rows;
    m.num_cols = num_cols;
    m.row_ptr.assign(1, 0);
    for (const auto& s : shards) {
      const Index base = m.col_index.size();
      for (std::size_t r = 1; r < s.row_ptr.size(); ++r) m.row_ptr.push_back(base + s.row_ptr[r]);
      m.col_index.insert(m.col_index.end(), s.col_index.begin(), s.col_index.end());
      m.values.insert(m.values.end(), s.values.begin(), s.values.end());
    }
    return m;
  }
};

inline DistributedPlan build_distributed_plan(const CsrMatrix& m, const WorkAssignment& a, const VectorLayout& x_layout,
                                              const VectorLayout& b_layout) {
  if (x_layout.nodelets() != a.nodelets || b_layout.nodelets() != a.nodelets) {
    throw DimensionError("layouts and work assignment disagree on the nodelet count");
  }
  if (x_layout.length() != m.num_cols) throw DimensionError("x layout length must equal the column count");
  if (b_layout.length() != m.num_rows) throw DimensionError("b layout length must equal the row count");
  if (a.num_rows() != m.num_rows || a.nodelet_first_row.front() != 0) {
    throw DimensionError("work assignment does not cover the matrix rows");
  }
  if (a.thread_rows.size() != a.total_threads()) throw DimensionError("work assignment has the wrong thread count");
  for (std::size_t t = 0; t + 1 < a.thread_rows.size(); ++t) {
    if (a.thread_rows[t].last != a.thread_rows[t + 1].first) {
      throw DimensionError("thread row ranges must be consecutive");
    }
  }

  DistributedPlan plan{m.num_rows, m.num_cols, {}, a, x_layout, b_layout};
  plan.shards.reserve(a.nodelets);
  for (Nodelet k = 0; k < a.nodelets; ++k) {
    const RowRange rows = a.nodelet_rows(k);
    CsrShard s;
    s.first_row = rows.first;
    const Index base = m.row_ptr[rows.first];
    s.row_ptr.clear();
    for (Index r = rows.first; r <= rows.last; ++r) s.row_ptr.push_back(m.row_ptr[r] - base);
    s.col_index.assign(m.col_index.begin() + base, m.col_index.begin() + m.row_ptr[rows.last]);
    s.values.assign(m.values.begin() + base, m.values.begin() + m.row_ptr[rows.last]);
    plan.shards.push_back(std::move(s));
  }
  return plan;
}

}  // namespace emuspmv
