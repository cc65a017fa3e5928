#pragma once

// Symmetric row/column relabelings B = P A P^T.

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "emuspmv/matrix_market.hpp"
#include "emuspmv/rng.hpp"
#include "emuspmv/sparse.hpp"

namespace emuspmv {

class PermutationError : public std::runtime_error {
 public:
  enum class Kind { WrongLength, OutOfRange, Repeated, Malformed };

  PermutationError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// new_index_of[k] is the new position of old index k.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<Index> new_index_of) : new_index_of_(std::move(new_index_of)) {
    std::vector<bool> seen(new_index_of_.size(), false);
    for (std::size_t k = 0; k < new_index_of_.size(); ++k) {
      const Index v = new_index_of_[k];
      if (v >= new_index_of_.size()) {
        throw PermutationError(PermutationError::Kind::OutOfRange, 0,
                               "entry " + std::to_string(k) + " maps to " + std::to_string(v));
      }
      if (seen[v]) {
        throw PermutationError(PermutationError::Kind::Repeated, 0, "index " + std::to_string(v) + " repeated");
      }
      seen[v] = true;
    }
  }

  static Permutation identity(Index n) {
    std::vector<Index> p(n);
    for (Index i = 0; i < n; ++i) p[i] = i;
    return Permutation(std::move(p));
  }

  Index size() const { return static_cast<Index>(new_index_of_.size()); }
  Index operator[](Index old_index) const { return new_index_of_[old_index]; }
  const std::vector<Index>& new_index_of() const { return new_index_of_; }

  Permutation inverse() const {
    std::vector<Index> inv(new_index_of_.size());
    for (Index k = 0; k < size(); ++k) inv[new_index_of_[k]] = k;
    return Permutation(std::move(inv));
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<Index> new_index_of_;
};

/// (P v)[p[k]] = v[k]
inline DenseVector permute_vector(const Permutation& p, std::span<const double> v) {
  if (v.size() != p.size()) throw DimensionError("vector length does not match permutation size");
  DenseVector out(v.size());
  for (Index k = 0; k < p.size(); ++k) out[p[k]] = v[k];
  return out;
}

/// Breadth-first numbering over the pattern of A + A^T. Neighbours are visited
/// in ascending old index; when a component is exhausted the traversal restarts
/// at the smallest unvisited vertex.
inline Permutation bfs_order(const CsrMatrix& m, Index start = 0) {
  if (!m.square()) throw DimensionError("BFS ordering requires a square matrix");
  const Index n = m.num_rows;
  if (n == 0) return Permutation{};
  if (start >= n) throw DimensionError("BFS start vertex out of range");

  std::vector<std::vector<Index>> adj(n);
  for (Index r = 0; r < n; ++r) {
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) {
      const Index c = m.col_index[j];
      if (c == r) continue;
      adj[r].push_back(c);
      adj[c].push_back(r);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  constexpr Index unvisited = ~Index{0};
  std::vector<Index> order(n, unvisited);
  Index next_label = 0;
  Index sweep = 0;
  std::deque<Index> queue;
  auto visit_from = [&](Index root) {
    order[root] = next_label++;
    queue.push_back(root);
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      for (Index w : adj[v]) {
        if (order[w] == unvisited) {
          order[w] = next_label++;
          queue.push_back(w);
        }
      }
    }
  };
  visit_from(start);
  while (next_label < n) {
    while (order[sweep] != unvisited) ++sweep;
    visit_from(sweep);
  }
  return Permutation(std::move(order));
}

/// Fisher-Yates shuffle driven by mt19937_64(seed) (see rng.hpp).
/// Returns the shuffled sequence interpreted as new_index_of.
inline Permutation random_order(Index n, std::uint64_t seed) {
  std::vector<Index> p(n);
  for (Index i = 0; i < n; ++i) p[i] = i;
  Rng rng(seed);
  for (Index i = n; i > 1; --i) {
    const Index j = rng.below(i);
    std::swap(p[i - 1], p[j]);
  }
  return Permutation(std::move(p));
}

/// One 0-based integer per line; '#' comment lines and blank lines are skipped.
inline Permutation load_permutation(std::istream& in, Index expected_size) {
  using K = PermutationError::Kind;
  std::vector<Index> p;
  p.reserve(expected_size);
  std::vector<bool> seen(expected_size, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() != 1) throw PermutationError(K::Malformed, line_no, "expected a single index");
    const auto v = detail::parse_index(tok[0]);
    if (!v) throw PermutationError(K::Malformed, line_no, "'" + std::string(tok[0]) + "' is not an index");
    if (p.size() >= expected_size) {
      throw PermutationError(K::WrongLength, line_no,
                             "more than the expected " + std::to_string(expected_size) + " entries");
    }
    if (*v >= expected_size) {
      throw PermutationError(K::OutOfRange, line_no,
                             "index " + std::to_string(*v) + " outside [0, " + std::to_string(expected_size) + ")");
    }
    if (seen[*v]) throw PermutationError(K::Repeated, line_no, "index " + std::to_string(*v) + " repeated");
    seen[*v] = true;
    p.push_back(*v);
  }
  if (p.size() != expected_size) {
    throw PermutationError(K::WrongLength, 0,
                           "expected " + std::to_string(expected_size) + " entries, found " + std::to_string(p.size()));
  }
  return Permutation(std::move(p));
}

inline Permutation load_permutation(std::string_view text, Index expected_size) {
  std::istringstream in{std::string(text)};
  return load_permutation(in, expected_size);
}

inline void write_permutation(std::ostream& out, const Permutation& p) {
  out << "# new_index_of old->new, 0-based\n";
  for (Index v : p.new_index_of()) out << v << '\n';
}

/// Entry (i, j, v) moves to (p[i], p[j], v); the result is canonical CSR.
inline CsrMatrix apply_permutation(const CsrMatrix& m, const Permutation& p) {
  if (!m.square()) throw DimensionError("symmetric permutation requires a square matrix");
  if (p.size() != m.num_rows) throw DimensionError("permutation size does not match matrix dimension");
  const Index n = m.num_rows;
  const Permutation inv = p.inverse();

  CsrMatrix out;
  out.num_rows = n;
  out.num_cols = n;
  out.row_ptr.assign(n + 1, 0);
  out.col_index.reserve(m.nnz());
  out.values.reserve(m.nnz());
  std::vector<std::pair<Index, double>> row;
  for (Index new_r = 0; new_r < n; ++new_r) {
    const Index old_r = inv[new_r];
    row.clear();
    for (Index j = m.row_ptr[old_r]; j < m.row_ptr[old_r + 1]; ++j) row.emplace_back(p[m.col_index[j]], m.values[j]);
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [c, v] : row) {
      out.col_index.push_back(c);
      out.values.push_back(v);
    }
    out.row_ptr[new_r + 1] = out.col_index.size();
  }
  return out;
}

/// max |i - j| over stored entries.
inline Index matrix_bandwidth(const CsrMatrix& m) {
  if (!m.square()) throw DimensionError("matrix bandwidth requires a square matrix");
  Index bw = 0;
  for (Index r = 0; r < m.num_rows; ++r) {
    for (Index j = m.row_ptr[r]; j < m.row_ptr[r + 1]; ++j) {
      const Index c = m.col_index[j];
      bw = std::max(bw, c > r ? c - r : r - c);
    }
  }
  return bw;
}

}  // namespace emuspmv
