#include <doctest.h>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"
#include "ckg/rng.hpp"
#include "ckg/wl.hpp"
#include "helpers.hpp"

using namespace ckg;
using testing::make;

TEST_SUITE("wl") {
  TEST_CASE("regular graphs keep one color") {
    const auto h = wl1_refine(graphs::cycle(7));
    for (const auto& round : h.rounds) CHECK(histogram(round).size() == 1);
  }

  TEST_CASE("path-3 splits endpoints from the middle in round 1") {
    const auto h = wl1_refine(graphs::path(3));
    REQUIRE(h.num_rounds() >= 2);
    CHECK(histogram(h.rounds[0]).size() == 1);
    const auto& c = h.rounds[1];
    CHECK(c[0] == c[2]);
    CHECK(c[0] != c[1]);
  }

  TEST_CASE("single node") {
    const auto h = gdwl_refine(make(1, {}), WLMethod::GDWL_SPD);
    CHECK(h.final_colors().size() == 1);
  }

  TEST_CASE("initial colors come from node labels") {
    const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    const auto g = Graph::build(4, e, {.node_labels = std::vector<int>{5, 5, 9, 5}});
    const auto h = wl1_refine(g);
    CHECK(h.rounds[0][0] == h.rounds[0][1]);
    CHECK(h.rounds[0][0] != h.rounds[0][2]);
  }

  TEST_CASE("c6 versus two triangles") {
    const auto [c6, two] = builtin_wl_pair("c6-vs-2c3");
    CHECK(c6.num_nodes() == 6);
    CHECK(num_components(two) == 2);

    const auto wl = distinguishes(c6, two, WLMethod::WL1);
    CHECK_FALSE(wl.distinguished);
    CHECK_FALSE(wl.round.has_value());
    for (const auto& [a, b] : wl.histograms) CHECK(a == b);

    const auto spd = distinguishes(c6, two, WLMethod::GDWL_SPD);
    CHECK(spd.distinguished);
    CHECK(spd.round == std::optional<std::size_t>{1});

    const auto j = spd.to_json();
    CHECK(j["method"] == "gdwl-spd");
    CHECK(j["distinguished"] == true);
    CHECK(j["round"] == 1);

    CHECK_THROWS_AS(distinguishes(c6, two, WLMethod::GDWL_RD), Error);
    CHECK_THROWS_AS(builtin_wl_pair("k4-vs-c4"), Error);
  }

  TEST_CASE("identical graphs are never distinguished") {
    for (const auto m : {WLMethod::WL1, WLMethod::GDWL_SPD, WLMethod::GDWL_RD})
      CHECK_FALSE(distinguishes(graphs::path(5), graphs::path(5), m).distinguished);
  }

  TEST_CASE("relabeling leaves every round's histogram unchanged") {
    Rng rng(17);
    for (const auto m : {WLMethod::WL1, WLMethod::GDWL_SPD, WLMethod::GDWL_RD}) {
      const auto g = graphs::random_connected(10, 0.15, rng);
      for (int t = 0; t < 5; ++t) {
        const auto h = g.permuted(rng.permutation(10));
        const auto r = distinguishes(g, h, m);
        CHECK_FALSE(r.distinguished);
        for (const auto& [a, b] : r.histograms) CHECK(a == b);
      }
    }
  }

  TEST_CASE("gd-wl separates graphs that wl1 cannot") {
    // Both are 3-regular on 8 nodes; the cube is bipartite, the other has triangles.
    const auto cube = make(8, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4},
                               {0, 4}, {1, 5}, {2, 6}, {3, 7}});
    const auto prism = make(8, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {0, 3}, {1, 6},
                                {6, 4}, {2, 7}, {7, 5}, {6, 7}});
    CHECK_FALSE(distinguishes(cube, prism, WLMethod::WL1).distinguished);
    CHECK(distinguishes(cube, prism, WLMethod::GDWL_SPD).distinguished);
    CHECK(distinguishes(cube, prism, WLMethod::GDWL_RD).distinguished);
  }

  TEST_CASE("method names") {
    for (const auto m : {WLMethod::WL1, WLMethod::GDWL_SPD, WLMethod::GDWL_RD})
      CHECK(wl_method_from_string(to_string(m)) == m);
  }
}
