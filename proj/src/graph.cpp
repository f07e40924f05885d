#include "ckg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"
#include "ckg/rng.hpp"

namespace ckg {

Graph Graph::build(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                   GraphAttributes attrs, bool allow_self_loops) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "graph needs at least one node");
  if (attrs.node_attrs && static_cast<std::size_t>(attrs.node_attrs->rows()) != n)
    throw Error(ErrorCode::LengthMismatch, "node_attrs must have one row per node");
  if (attrs.node_labels && attrs.node_labels->size() != n)
    throw Error(ErrorCode::LengthMismatch, "node_labels must have one entry per node");
  if (attrs.edge_attrs && static_cast<std::size_t>(attrs.edge_attrs->rows()) != edges.size())
    throw Error(ErrorCode::LengthMismatch, "edge_attrs must have one row per edge");

  std::vector<std::pair<Edge, std::size_t>> tagged;
  tagged.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [a, b] = edges[e];
    if (a >= n || b >= n)
      throw Error(ErrorCode::InvalidEdge,
                  "edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
    if (a == b && !allow_self_loops)
      throw Error(ErrorCode::InvalidEdge, "self-loop at node " + std::to_string(a));
    tagged.push_back({Edge{std::min(a, b), std::max(a, b)}, e});
  }
  std::sort(tagged.begin(), tagged.end());
  for (std::size_t e = 1; e < tagged.size(); ++e) {
    if (tagged[e].first == tagged[e - 1].first)
      throw Error(ErrorCode::DuplicateEdge, "edge (" + std::to_string(tagged[e].first.u) + "," +
                                                std::to_string(tagged[e].first.v) + ") repeated");
  }

  Graph g;
  g.n_ = n;
  g.adj_.resize(n);
  for (const auto& [edge, _] : tagged) {
    g.edges_.push_back(edge);
    g.adj_[edge.u].push_back(edge.v);
    if (edge.u != edge.v) g.adj_[edge.v].push_back(edge.u);
  }
  for (auto& nb : g.adj_) std::sort(nb.begin(), nb.end());

  if (attrs.edge_attrs) {
    DenseMatrix reordered(attrs.edge_attrs->rows(), attrs.edge_attrs->cols());
    for (std::size_t e = 0; e < tagged.size(); ++e)
      reordered.row(static_cast<Eigen::Index>(e)) =
          attrs.edge_attrs->row(static_cast<Eigen::Index>(tagged[e].second));
    attrs.edge_attrs = std::move(reordered);
  }
  g.attrs_ = std::move(attrs);
  return g;
}

std::optional<std::size_t> Graph::edge_index(std::size_t i, std::size_t j) const {
  const Edge key{std::min(i, j), std::max(i, j)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

Graph Graph::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != n_) throw Error(ErrorCode::LengthMismatch, "permutation size");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(edges_.size());
  for (const auto& e : edges_) edges.emplace_back(perm[e.u], perm[e.v]);

  GraphAttributes attrs;
  if (attrs_.node_attrs) {
    DenseMatrix moved(attrs_.node_attrs->rows(), attrs_.node_attrs->cols());
    for (std::size_t i = 0; i < n_; ++i)
      moved.row(static_cast<Eigen::Index>(perm[i])) =
          attrs_.node_attrs->row(static_cast<Eigen::Index>(i));
    attrs.node_attrs = std::move(moved);
  }
  if (attrs_.node_labels) {
    std::vector<int> moved(n_);
    for (std::size_t i = 0; i < n_; ++i) moved[perm[i]] = (*attrs_.node_labels)[i];
    attrs.node_labels = std::move(moved);
  }
  attrs.edge_attrs = attrs_.edge_attrs;  // rows stay aligned with the edge list passed above
  const bool has_loops =
      std::any_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.u == e.v; });
  return build(n_, edges, std::move(attrs), has_loops);
}

DenseMatrix adjacency_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  DenseMatrix a = DenseMatrix::Zero(n, n);
  for (const auto& e : g.edges()) {
    a(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v)) = 1.0;
    a(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u)) = 1.0;
  }
  return a;
}

Vector degree_vector(const Graph& g) { return adjacency_matrix(g).rowwise().sum(); }

DenseMatrix random_walk_matrix(const Graph& g) {
  DenseMatrix m = adjacency_matrix(g);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double d = m.row(i).sum();
    if (d > 0.0) m.row(i) /= d;
  }
  return m;
}

std::vector<DenseMatrix> matrix_power_sequence(const DenseMatrix& m, std::size_t k) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::ShapeMismatch, "matrix must be square");
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "need at least one power");
  std::vector<DenseMatrix> out;
  out.reserve(k);
  out.push_back(DenseMatrix::Identity(m.rows(), m.cols()));
  for (std::size_t p = 1; p < k; ++p) out.push_back(out.back() * m);
  return out;
}

namespace {

std::vector<std::size_t> bfs_hops(const Graph& g, std::size_t src) {
  constexpr auto unseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.num_nodes(), unseen);
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : g.neighbors(u)) {
      if (dist[v] == unseen) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

DenseMatrix shortest_path_distances(const Graph& g) {
  const auto n = g.num_nodes();
  DenseMatrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hops = bfs_hops(g, i);
    for (std::size_t j = 0; j < n; ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          hops[j] == std::numeric_limits<std::size_t>::max() ? kUnreachable
                                                             : static_cast<double>(hops[j]);
  }
  return d;
}

std::size_t num_components(const Graph& g) {
  std::vector<bool> seen(g.num_nodes(), false);
  std::size_t count = 0;
  for (std::size_t s = 0; s < g.num_nodes(); ++s) {
    if (seen[s]) continue;
    ++count;
    for (std::size_t j = 0; const auto h : bfs_hops(g, s)) {
      if (h != std::numeric_limits<std::size_t>::max()) seen[j] = true;
      ++j;
    }
  }
  return count;
}

bool is_connected(const Graph& g) { return num_components(g) == 1; }

DenseMatrix resistance_distance(const Graph& g) {
  if (!is_connected(g))
    throw Error(ErrorCode::DisconnectedGraph, "resistance distance needs a connected graph");
  const DenseMatrix a = adjacency_matrix(g);
  const Eigen::MatrixXd lap = Eigen::MatrixXd(a.rowwise().sum().asDiagonal()) - Eigen::MatrixXd(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  const auto& vals = eig.eigenvalues();
  const auto& vecs = eig.eigenvectors();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(vals.size());
  for (Eigen::Index k = 0; k < vals.size(); ++k)
    if (std::abs(vals(k)) > 1e-10) inv(k) = 1.0 / vals(k);
  const Eigen::MatrixXd pinv = vecs * inv.asDiagonal() * vecs.transpose();

  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  DenseMatrix rd(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      rd(i, j) = i == j ? 0.0 : std::max(0.0, pinv(i, i) + pinv(j, j) - 2.0 * pinv(i, j));
  return 0.5 * (rd + rd.transpose());
}

std::vector<std::vector<std::size_t>> k_hop_support(const Graph& g, std::size_t k) {
  std::vector<std::vector<std::size_t>> supp(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto hops = bfs_hops(g, i);
    for (std::size_t j = 0; j < hops.size(); ++j)
      if (hops[j] <= k) supp[i].push_back(j);
  }
  return supp;
}

DenseMatrix permute_matrix(const DenseMatrix& m, std::span<const std::size_t> perm) {
  DenseMatrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) = m(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

DenseMatrix matrix_from_json(const nlohmann::json& rows, const char* field) {
  if (!rows.is_array()) throw Error(ErrorCode::ParseError, std::string(field) + " must be an array");
  if (rows.empty()) return DenseMatrix(0, 0);
  const auto cols = rows.front().size();
  DenseMatrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols)
      throw Error(ErrorCode::ParseError, std::string(field) + " rows must have equal width");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const DenseMatrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Graph graph_from_json(const nlohmann::json& j) {
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "n" && key != "edges" && key != "node_attrs" && key != "edge_attrs" &&
          key != "node_labels")
        throw Error(ErrorCode::UnknownField, "graph field '" + key + "'");
    }
    const auto n = j.at("n").get<std::size_t>();
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::ParseError, "edge must be [i,j]");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    GraphAttributes attrs;
    if (j.contains("node_attrs") && !j["node_attrs"].is_null())
      attrs.node_attrs = matrix_from_json(j["node_attrs"], "node_attrs");
    if (j.contains("edge_attrs") && !j["edge_attrs"].is_null())
      attrs.edge_attrs = matrix_from_json(j["edge_attrs"], "edge_attrs");
    if (j.contains("node_labels") && !j["node_labels"].is_null())
      attrs.node_labels = j["node_labels"].get<std::vector<int>>();
    return Graph::build(n, edges, std::move(attrs));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["n"] = g.num_nodes();
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({e.u, e.v});
  j["edges"] = std::move(edges);
  j["node_attrs"] = g.node_attrs() ? matrix_to_json(*g.node_attrs()) : nlohmann::json(nullptr);
  j["edge_attrs"] = g.edge_attrs() ? matrix_to_json(*g.edge_attrs()) : nlohmann::json(nullptr);
  j["node_labels"] = g.node_labels() ? nlohmann::json(*g.node_labels()) : nlohmann::json(nullptr);
  return j;
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open graph file " + path);
  try {
    return graph_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Named graphs

namespace graphs {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

Graph path(std::size_t n) {
  EdgeList e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph::build(n, e);
}

Graph cycle(std::size_t n) {
  EdgeList e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph::build(n, e);
}

Graph complete(std::size_t n) {
  EdgeList e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Graph::build(n, e);
}

Graph disjoint_cycles(std::size_t copies, std::size_t len) {
  EdgeList e;
  for (std::size_t c = 0; c < copies; ++c)
    for (std::size_t i = 0; i < len; ++i) e.emplace_back(c * len + i, c * len + (i + 1) % len);
  return Graph::build(copies * len, e);
}

Graph oversmoothing_toy() {
  const EdgeList e{{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 5}};
  return Graph::build(6, e);
}

Graph edge_detection_toy() {
  const EdgeList e{{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {5, 6}, {6, 7}, {3, 7}};
  return Graph::build(8, e);
}

Graph erdos_renyi(std::size_t n, double p, Rng& rng) {
  EdgeList e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) e.emplace_back(i, j);
  return Graph::build(n, e);
}

Graph random_connected(std::size_t n, double p, Rng& rng) {
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  EdgeList e;
  const auto order = rng.permutation(n);
  for (std::size_t k = 1; k < n; ++k) {
    const auto a = order[k];
    const auto b = order[rng.below(k)];
    used[a][b] = used[b][a] = true;
    e.emplace_back(a, b);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!used[i][j] && rng.uniform() < p) e.emplace_back(i, j);
  return Graph::build(n, e);
}

}  // namespace graphs

}  // namespace ckg
