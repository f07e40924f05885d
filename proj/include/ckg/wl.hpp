#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ckg/graph.hpp"

namespace ckg {

enum class WLMethod { WL1, GDWL_SPD, GDWL_RD };

std::string to_string(WLMethod m);
WLMethod wl_method_from_string(const std::string& s);

/// Colors per round; rounds[0] is the initial coloring (node labels, or uniform).
struct ColorHistory {
  std::vector<std::vector<int>> rounds;

  std::size_t num_rounds() const { return rounds.size(); }
  const std::vector<int>& final_colors() const { return rounds.back(); }
};

using ColorHistogram = std::map<int, int>;
ColorHistogram histogram(const std::vector<int>& colors);

/// Refines several graphs with one shared color table so ids are comparable
/// across graphs. Stops once the joint partition stops splitting or after
/// max_rounds (default: largest node count). Throws DisconnectedGraph for RD.
std::vector<ColorHistory> refine_jointly(const std::vector<const Graph*>& graphs, WLMethod method,
                                         std::optional<std::size_t> max_rounds = std::nullopt);

ColorHistory wl1_refine(const Graph& g, std::optional<std::size_t> max_rounds = std::nullopt);
ColorHistory gdwl_refine(const Graph& g, WLMethod distance,
                         std::optional<std::size_t> max_rounds = std::nullopt);

struct WLReport {
  WLMethod method = WLMethod::WL1;
  bool distinguished = false;
  std::optional<std::size_t> round;  // first round whose histograms differ
  std::vector<std::pair<ColorHistogram, ColorHistogram>> histograms;

  nlohmann::json to_json() const;
};

WLReport distinguishes(const Graph& g1, const Graph& g2, WLMethod method);

/// Built-in probe pairs: "c6-vs-2c3".
std::pair<Graph, Graph> builtin_wl_pair(const std::string& name);

}  // namespace ckg
