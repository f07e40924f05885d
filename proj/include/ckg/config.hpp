#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ckg/network.hpp"

namespace ckg {

enum class ExperimentKind { ToyOversmoothing, ToyEdgeDetection, PropSuite, WLProbe, PEDump };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::ToyOversmoothing;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output;  // empty: no file, summary only

  // Toy experiments
  std::vector<int> depths{2, 6};
  std::vector<std::string> models{"gcn", "ckgcn"};
  std::vector<std::string> variants{"ckgconv", "gcnconv", "softmax", "softplus"};
  int epochs = 200;
  double lr = 1e-3;
  std::optional<ModelConfig> model;  // overrides the toy CKGCN (depth/constraint still per run)

  // WL probe
  std::string pair;
  std::string g1;
  std::string g2;
  std::string method = "wl1";

  // PE dump
  std::string graph;
  std::string kind = "rrwp";
  std::size_t k = 5;
  bool rescale = false;

  nlohmann::json to_json() const;
};

/// Strict parse with defaults filled. Throws ParseError, UnknownField.
ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

/// Runs the experiment, writes metrics to cfg.output (when set) and a summary
/// to `out`. Returns 1 when `check` is set and an acceptance threshold fails,
/// or when a property suite fails; 0 otherwise.
int run_experiment(const ExperimentConfig& cfg, bool check, std::ostream& out);

}  // namespace ckg
