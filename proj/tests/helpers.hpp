#pragma once

#include <utility>
#include <vector>

#include "ckg/graph.hpp"
#include "ckg/rng.hpp"

namespace testing {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

inline ckg::Graph make(std::size_t n, const EdgeList& e) { return ckg::Graph::build(n, e); }

inline ckg::DenseMatrix random_matrix(ckg::Rng& rng, Eigen::Index r, Eigen::Index c,
                                      double lo = -1.0, double hi = 1.0) {
  ckg::DenseMatrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

inline EdgeList edges_of(const ckg::Graph& g) {
  EdgeList out;
  for (const auto& e : g.edges()) out.emplace_back(e.u, e.v);
  return out;
}

/// Floyd-Warshall with -1 for unreachable.
inline std::vector<std::vector<long>> floyd(const ckg::Graph& g) {
  const auto n = g.num_nodes();
  const long inf = 1L << 40;
  std::vector<std::vector<long>> d(n, std::vector<long>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& e : g.edges()) d[e.u][e.v] = d[e.v][e.u] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto& row : d)
    for (auto& v : row)
      if (v >= inf) v = -1;
  return d;
}

}  // namespace testing
