#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "emuspmv/rng.hpp"
#include "emuspmv/sparse.hpp"

namespace emuspmv {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RmatParams {
  unsigned scale = 10;
  Index target_nnz = 1024;
  double a = 0.45;
  double b = 0.22;
  double c = 0.22;
  std::uint64_t seed = 1;

  double d() const { return 1.0 - a - b - c; }

  void validate() const {
    if (a < 0 || b < 0 || c < 0) throw ParameterError("RMAT probabilities may not be negative");
    if (a + b + c > 1.0 + 1e-12) throw ParameterError("RMAT probabilities a + b + c may not exceed 1");
    if (scale < 1 || scale > 31) throw ParameterError("RMAT scale must lie in [1, 31]");
    if (target_nnz < 1) throw ParameterError("RMAT target_nnz must be at least 1");
  }
};

/// Recursive-matrix generator over a 2^scale x 2^scale matrix. Each of the
/// target_nnz edges descends independently: at every level it picks quadrant
/// a (top-left), b (top-right), c (bottom-left) or d (bottom-right). Repeated
/// edges are dropped, so the result may hold fewer than target_nnz entries.
/// All values are 1.0 and entries come out sorted by (row, col).
inline CooMatrix generate_rmat(const RmatParams& p) {
  p.validate();

  const Index n = Index{1} << p.scale;
  const double ab = p.a + p.b;
  const double abc = p.a + p.b + p.c;

  Rng rng(p.seed);
  std::vector<CooEntry> edges;
  edges.reserve(p.target_nnz);
  for (Index e = 0; e < p.target_nnz; ++e) {
    Index row = 0;
    Index col = 0;
    for (unsigned level = 0; level < p.scale; ++level) {
      const double u = rng.uniform01();
      row <<= 1;
      col <<= 1;
      if (u < p.a) {
        // top-left
      } else if (u < ab) {
        col |= 1;
      } else if (u < abc) {
        row |= 1;
      } else {
        row |= 1;
        col |= 1;
      }
    }
    edges.push_back({row, col, 1.0});
  }

  auto less = [](const CooEntry& x, const CooEntry& y) { return x.row != y.row ? x.row < y.row : x.col < y.col; };
  std::sort(edges.begin(), edges.end(), less);
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const CooEntry& x, const CooEntry& y) { return x.row == y.row && x.col == y.col; }),
              edges.end());
  return CooMatrix{n, n, std::move(edges)};
}

}  // namespace emuspmv
