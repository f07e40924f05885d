#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace ckg {

class Rng;

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Marks unreachable pairs in shortest-path matrices. Finite on purpose so
/// matrices stay NaN/Inf free.
inline constexpr double kUnreachable = std::numeric_limits<double>::max();

/// Undirected edge with u <= v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct GraphAttributes {
  std::optional<DenseMatrix> node_attrs;  // n x d_h
  std::optional<DenseMatrix> edge_attrs;  // |E| x d_e, aligned with the input edge order
  std::optional<std::vector<int>> node_labels;
};

class Graph {
 public:
  /// Validates and canonicalizes. Throws InvalidEdge / DuplicateEdge.
  static Graph build(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                     GraphAttributes attrs = {}, bool allow_self_loops = false);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  /// Sorted, canonical (u <= v) edge list. Edge attributes follow this order.
  std::span<const Edge> edges() const { return edges_; }
  std::span<const std::size_t> neighbors(std::size_t i) const { return adj_[i]; }
  std::optional<std::size_t> edge_index(std::size_t i, std::size_t j) const;

  const std::optional<DenseMatrix>& node_attrs() const { return attrs_.node_attrs; }
  const std::optional<DenseMatrix>& edge_attrs() const { return attrs_.edge_attrs; }
  const std::optional<std::vector<int>>& node_labels() const { return attrs_.node_labels; }
  std::size_t node_attr_dim() const { return attrs_.node_attrs ? attrs_.node_attrs->cols() : 0; }
  std::size_t edge_attr_dim() const { return attrs_.edge_attrs ? attrs_.edge_attrs->cols() : 0; }

  /// Relabels node i as perm[i]; attributes move with their nodes/edges.
  Graph permuted(std::span<const std::size_t> perm) const;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
  GraphAttributes attrs_;
};

DenseMatrix adjacency_matrix(const Graph& g);
Vector degree_vector(const Graph& g);
/// M = D^-1 A; rows of isolated nodes are zero.
DenseMatrix random_walk_matrix(const Graph& g);
/// [I, M, ..., M^(k-1)]. Throws ShapeMismatch for non-square input.
std::vector<DenseMatrix> matrix_power_sequence(const DenseMatrix& m, std::size_t k);
/// BFS hop counts; unreachable pairs hold kUnreachable.
DenseMatrix shortest_path_distances(const Graph& g);
/// Effective resistance from the Laplacian pseudoinverse. Throws DisconnectedGraph.
DenseMatrix resistance_distance(const Graph& g);
/// supp(i) = {j : SPD(i, j) <= k}, sorted ascending.
std::vector<std::vector<std::size_t>> k_hop_support(const Graph& g, std::size_t k);
bool is_connected(const Graph& g);
std::size_t num_components(const Graph& g);

/// P * m * P^T for the relabeling i -> perm[i].
DenseMatrix permute_matrix(const DenseMatrix& m, std::span<const std::size_t> perm);

Graph graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const Graph& g);
Graph load_graph(const std::string& path);

namespace graphs {

Graph path(std::size_t n);
Graph cycle(std::size_t n);
Graph complete(std::size_t n);
/// Disjoint union of `copies` cycles of length `len`.
Graph disjoint_cycles(std::size_t copies, std::size_t len);
/// Six-cycle of the anti-oversmoothing toy; walking the cycle visits 0-1-3-5-4-2.
Graph oversmoothing_toy();
/// Two-row eight-cycle of the edge-detection toy.
Graph edge_detection_toy();
/// G(n, p) with every pair sampled independently.
Graph erdos_renyi(std::size_t n, double p, Rng& rng);
/// Random spanning tree plus G(n, p) extra edges; always connected.
Graph random_connected(std::size_t n, double p, Rng& rng);

}  // namespace graphs

}  // namespace ckg
