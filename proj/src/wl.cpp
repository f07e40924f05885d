#include "ckg/wl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"

namespace ckg {

std::string to_string(WLMethod m) {
  switch (m) {
    case WLMethod::WL1: return "wl1";
    case WLMethod::GDWL_SPD: return "gdwl-spd";
    case WLMethod::GDWL_RD: return "gdwl-rd";
  }
  return "wl1";
}

WLMethod wl_method_from_string(const std::string& s) {
  if (s == "wl1") return WLMethod::WL1;
  if (s == "gdwl-spd") return WLMethod::GDWL_SPD;
  if (s == "gdwl-rd") return WLMethod::GDWL_RD;
  throw Error(ErrorCode::InvalidArgument, "unknown WL method '" + s + "'");
}

ColorHistogram histogram(const std::vector<int>& colors) {
  ColorHistogram h;
  for (const int c : colors) ++h[c];
  return h;
}

namespace {

constexpr std::int64_t kUnreachableBucket = -1;

/// Integer distance buckets: SPD hops, RD rounded to 9 decimals.
std::vector<std::vector<std::int64_t>> distance_buckets(const Graph& g, WLMethod method) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const DenseMatrix d =
      method == WLMethod::GDWL_RD ? resistance_distance(g) : shortest_path_distances(g);
  std::vector<std::vector<std::int64_t>> out(g.num_nodes(), std::vector<std::int64_t>(g.num_nodes()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = d(i, j);
      std::int64_t bucket = 0;
      if (v == kUnreachable) bucket = kUnreachableBucket;
      else if (method == WLMethod::GDWL_RD) bucket = std::llround(v * 1e9);
      else bucket = std::llround(v);
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = bucket;
    }
  return out;
}

using Signature = std::pair<int, std::vector<std::pair<std::int64_t, int>>>;

std::size_t count_classes(const std::vector<std::vector<int>>& colors) {
  std::set<int> all;
  for (const auto& c : colors) all.insert(c.begin(), c.end());
  return all.size();
}

}  // namespace

std::vector<ColorHistory> refine_jointly(const std::vector<const Graph*>& graphs, WLMethod method,
                                         std::optional<std::size_t> max_rounds) {
  std::size_t largest = 1;
  for (const auto* g : graphs) largest = std::max(largest, g->num_nodes());
  const std::size_t limit = max_rounds.value_or(largest);

  std::vector<std::vector<std::vector<std::int64_t>>> dist;
  if (method != WLMethod::WL1)
    for (const auto* g : graphs) dist.push_back(distance_buckets(*g, method));

  // Initial colors from node labels (shared canonical ids) or uniform.
  std::vector<std::vector<int>> colors(graphs.size());
  {
    std::set<int> labels;
    for (const auto* g : graphs)
      if (g->node_labels()) labels.insert(g->node_labels()->begin(), g->node_labels()->end());
    const std::vector<int> sorted(labels.begin(), labels.end());
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      const auto& g = *graphs[k];
      colors[k].assign(g.num_nodes(), 0);
      if (!g.node_labels()) continue;
      for (std::size_t v = 0; v < g.num_nodes(); ++v)
        colors[k][v] = static_cast<int>(
            std::lower_bound(sorted.begin(), sorted.end(), (*g.node_labels())[v]) - sorted.begin());
    }
  }

  std::vector<ColorHistory> history(graphs.size());
  for (std::size_t k = 0; k < graphs.size(); ++k) history[k].rounds.push_back(colors[k]);

  std::size_t classes = count_classes(colors);
  for (std::size_t round = 1; round <= limit; ++round) {
    std::vector<std::vector<Signature>> sigs(graphs.size());
    std::set<Signature> table;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      const auto& g = *graphs[k];
      for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        Signature s{colors[k][v], {}};
        if (method == WLMethod::WL1) {
          for (const auto u : g.neighbors(v)) s.second.emplace_back(0, colors[k][u]);
        } else {
          for (std::size_t u = 0; u < g.num_nodes(); ++u)
            s.second.emplace_back(dist[k][v][u], colors[k][u]);
        }
        std::sort(s.second.begin(), s.second.end());
        table.insert(s);
        sigs[k].push_back(std::move(s));
      }
    }
    const std::vector<Signature> ordered(table.begin(), table.end());
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      for (std::size_t v = 0; v < sigs[k].size(); ++v)
        colors[k][v] = static_cast<int>(
            std::lower_bound(ordered.begin(), ordered.end(), sigs[k][v]) - ordered.begin());
      history[k].rounds.push_back(colors[k]);
    }
    const std::size_t now = count_classes(colors);
    if (now == classes) break;
    classes = now;
  }
  return history;
}

ColorHistory wl1_refine(const Graph& g, std::optional<std::size_t> max_rounds) {
  return refine_jointly({&g}, WLMethod::WL1, max_rounds).front();
}

ColorHistory gdwl_refine(const Graph& g, WLMethod distance, std::optional<std::size_t> max_rounds) {
  if (distance == WLMethod::WL1)
    throw Error(ErrorCode::InvalidArgument, "GD-WL needs a distance (SPD or RD)");
  return refine_jointly({&g}, distance, max_rounds).front();
}

nlohmann::json WLReport::to_json() const {
  auto hist = [](const ColorHistogram& h) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [color, count] : h) j[std::to_string(color)] = count;
    return j;
  };
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& [a, b] : histograms) rounds.push_back({hist(a), hist(b)});
  nlohmann::json j;
  j["method"] = ckg::to_string(method);
  j["distinguished"] = distinguished;
  j["round"] = round ? nlohmann::json(*round) : nlohmann::json(nullptr);
  j["histograms"] = std::move(rounds);
  return j;
}

WLReport distinguishes(const Graph& g1, const Graph& g2, WLMethod method) {
  const auto hist = refine_jointly({&g1, &g2}, method);
  WLReport report;
  report.method = method;
  const auto rounds = std::max(hist[0].num_rounds(), hist[1].num_rounds());
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto& a = hist[0].rounds[std::min(r, hist[0].num_rounds() - 1)];
    const auto& b = hist[1].rounds[std::min(r, hist[1].num_rounds() - 1)];
    report.histograms.emplace_back(histogram(a), histogram(b));
    if (!report.round && report.histograms.back().first != report.histograms.back().second)
      report.round = r;
  }
  report.distinguished = report.round.has_value();
  return report;
}

std::pair<Graph, Graph> builtin_wl_pair(const std::string& name) {
  if (name == "c6-vs-2c3") return {graphs::cycle(6), graphs::disjoint_cycles(2, 3)};
  throw Error(ErrorCode::InvalidArgument, "unknown built-in WL pair '" + name + "'");
}

}  // namespace ckg
