#include <doctest.h>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"
#include "ckg/graph.hpp"
#include "ckg/rng.hpp"
#include "helpers.hpp"

using namespace ckg;
using testing::make;

namespace {

bool throws_code(ErrorCode code, const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("build canonicalizes and validates") {
    const auto g = make(3, {{1, 0}, {2, 1}, {0, 2}});
    REQUIRE(g.num_edges() == 3);
    CHECK(g.edges()[0] == Edge{0, 1});
    CHECK(g.edges()[1] == Edge{0, 2});
    CHECK(g.edges()[2] == Edge{1, 2});
    CHECK(g.edge_index(2, 0) == std::optional<std::size_t>{1});
    CHECK_FALSE(make(3, {{0, 1}}).edge_index(1, 2).has_value());

    CHECK(throws_code(ErrorCode::InvalidEdge, [] { make(2, {{0, 2}}); }));
    CHECK(throws_code(ErrorCode::InvalidEdge, [] { make(2, {{1, 1}}); }));
    CHECK(throws_code(ErrorCode::DuplicateEdge, [] { make(2, {{0, 1}, {1, 0}}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { make(0, {}); }));
  }

  TEST_CASE("edge attributes follow the sorted edge order") {
    DenseMatrix ea(2, 1);
    ea << 10, 20;
    const std::vector<std::pair<std::size_t, std::size_t>> e{{1, 2}, {0, 1}};
    const auto g = Graph::build(3, e, {.edge_attrs = ea});
    CHECK((*g.edge_attrs())(0, 0) == 20);
    CHECK((*g.edge_attrs())(1, 0) == 10);
    DenseMatrix bad(3, 1);
    CHECK(throws_code(ErrorCode::LengthMismatch,
                      [&] { Graph::build(3, e, {.edge_attrs = bad}); }));
  }

  TEST_CASE("degrees") {
    CHECK(degree_vector(make(2, {{0, 1}})) == Vector::Ones(2));
    CHECK(degree_vector(graphs::complete(3)) == Vector::Constant(3, 2));
    CHECK(degree_vector(graphs::edge_detection_toy()) == Vector::Constant(8, 2));
    CHECK(degree_vector(graphs::oversmoothing_toy()) == Vector::Constant(6, 2));
  }

  TEST_CASE("toy graph edge sets") {
    const auto g = graphs::oversmoothing_toy();
    const testing::EdgeList want{{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 5}};
    CHECK(testing::edges_of(g) == want);
    CHECK(is_connected(graphs::edge_detection_toy()));
  }

  TEST_CASE("random walk matrix") {
    DenseMatrix want(2, 2);
    want << 0, 1, 1, 0;
    CHECK(random_walk_matrix(make(2, {{0, 1}})) == want);
    const auto k3 = random_walk_matrix(graphs::complete(3));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(k3(i, j) == doctest::Approx(i == j ? 0.0 : 0.5));
    const auto iso = random_walk_matrix(make(3, {{0, 1}}));
    CHECK(iso.row(2).isZero(0.0));
  }

  TEST_CASE("matrix powers") {
    const auto m = random_walk_matrix(make(2, {{0, 1}}));
    const auto seq = matrix_power_sequence(m, 3);
    REQUIRE(seq.size() == 3);
    CHECK(seq[0] == DenseMatrix::Identity(2, 2));
    CHECK(seq[1] == m);
    CHECK(seq[2] == DenseMatrix::Identity(2, 2));
    CHECK(matrix_power_sequence(m, 1).size() == 1);

    // Hand-multiplied square of the K3 walk matrix.
    const auto k3 = matrix_power_sequence(random_walk_matrix(graphs::complete(3)), 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(k3[2](i, j) == doctest::Approx(i == j ? 0.5 : 0.25));

    CHECK(throws_code(ErrorCode::ShapeMismatch,
                      [] { matrix_power_sequence(DenseMatrix::Zero(2, 3), 2); }));
  }

  TEST_CASE("shortest paths match Floyd-Warshall") {
    const auto p2 = shortest_path_distances(make(2, {{0, 1}}));
    CHECK(p2(0, 1) == 1);
    CHECK(p2(0, 0) == 0);
    CHECK(shortest_path_distances(graphs::cycle(6)).maxCoeff() == 3);
    const auto two = shortest_path_distances(graphs::disjoint_cycles(2, 3));
    CHECK(two(0, 3) == kUnreachable);
    CHECK(two(1, 2) == 1);

    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
      const auto g = graphs::erdos_renyi(2 + rng.below(10), 0.3, rng);
      const auto d = shortest_path_distances(g);
      const auto f = testing::floyd(g);
      for (std::size_t i = 0; i < g.num_nodes(); ++i)
        for (std::size_t j = 0; j < g.num_nodes(); ++j)
          CHECK(d(i, j) == (f[i][j] < 0 ? kUnreachable : static_cast<double>(f[i][j])));
    }
  }

  TEST_CASE("resistance distance") {
    CHECK(resistance_distance(make(2, {{0, 1}}))(0, 1) == doctest::Approx(1.0));
    const auto k3 = resistance_distance(graphs::complete(3));
    CHECK(k3(0, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(k3(1, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(k3(0, 0) == doctest::Approx(0.0));
    // Series resistors on a path.
    CHECK(resistance_distance(graphs::path(5))(0, 4) == doctest::Approx(4.0));
    // Two parallel paths of lengths 3 and 3 between antipodes of C6.
    CHECK(resistance_distance(graphs::cycle(6))(0, 3) == doctest::Approx(1.5));
    CHECK(throws_code(ErrorCode::DisconnectedGraph,
                      [] { resistance_distance(graphs::disjoint_cycles(2, 3)); }));
  }

  TEST_CASE("k-hop supports") {
    const auto c6 = graphs::cycle(6);
    for (const auto& s : k_hop_support(c6, 0)) CHECK(s.size() == 1);
    for (const auto& s : k_hop_support(c6, 1)) CHECK(s.size() == 3);
    for (const auto& s : k_hop_support(c6, 3)) CHECK(s.size() == 6);
    const auto two = k_hop_support(graphs::disjoint_cycles(2, 3), 10);
    CHECK(two[0] == std::vector<std::size_t>{0, 1, 2});
  }

  TEST_CASE("components") {
    CHECK(num_components(graphs::disjoint_cycles(3, 4)) == 3);
    CHECK(num_components(make(4, {{0, 1}})) == 3);
    Rng rng(3);
    for (int t = 0; t < 10; ++t) CHECK(is_connected(graphs::random_connected(12, 0.1, rng)));
  }

  TEST_CASE("permutation moves adjacency") {
    Rng rng(5);
    const auto g = graphs::random_connected(9, 0.3, rng);
    const auto perm = rng.permutation(9);
    const auto h = g.permuted(perm);
    const auto a = adjacency_matrix(g);
    const auto b = adjacency_matrix(h);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) CHECK(a(i, j) == b(perm[i], perm[j]));
    CHECK(permute_matrix(a, perm) == b);
  }

  TEST_CASE("json round trip") {
    DenseMatrix na(3, 2);
    na << 1, 2, 3, 4, 5, 6;
    const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}};
    const auto g = Graph::build(3, e, {.node_attrs = na, .node_labels = std::vector<int>{0, 1, 0}});
    const auto h = graph_from_json(graph_to_json(g));
    CHECK(testing::edges_of(h) == testing::edges_of(g));
    CHECK(*h.node_attrs() == na);
    CHECK(*h.node_labels() == std::vector<int>{0, 1, 0});
    CHECK(throws_code(ErrorCode::ParseError, [] {
      graph_from_json(nlohmann::json::parse(R"({"edges": [[0, 1]]})"));
    }));
    CHECK(throws_code(ErrorCode::UnknownField, [] {
      graph_from_json(nlohmann::json::parse(R"({"n": 2, "edges": [], "weights": []})"));
    }));
  }
}
