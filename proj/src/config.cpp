#include "ckg/config.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"
#include "ckg/verify.hpp"
#include "ckg/wl.hpp"

namespace ckg {

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ToyOversmoothing: return "ToyOversmoothing";
    case ExperimentKind::ToyEdgeDetection: return "ToyEdgeDetection";
    case ExperimentKind::PropSuite: return "PropSuite";
    case ExperimentKind::WLProbe: return "WLProbe";
    case ExperimentKind::PEDump: return "PEDump";
  }
  return "ToyOversmoothing";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (const auto k : {ExperimentKind::ToyOversmoothing, ExperimentKind::ToyEdgeDetection,
                       ExperimentKind::PropSuite, ExperimentKind::WLProbe, ExperimentKind::PEDump})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::ParseError, "unknown experiment '" + s + "'");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["experiment"] = ckg::to_string(experiment);
  j["seeds"] = seeds;
  j["output"] = output;
  switch (experiment) {
    case ExperimentKind::ToyOversmoothing:
      j["depths"] = depths;
      j["models"] = models;
      j["epochs"] = epochs;
      j["lr"] = lr;
      break;
    case ExperimentKind::ToyEdgeDetection:
      j["variants"] = variants;
      j["epochs"] = epochs;
      j["lr"] = lr;
      break;
    case ExperimentKind::WLProbe:
      if (!pair.empty()) j["pair"] = pair;
      else {
        j["g1"] = g1;
        j["g2"] = g2;
      }
      j["method"] = method;
      break;
    case ExperimentKind::PEDump:
      j["graph"] = graph;
      j["kind"] = kind;
      j["k"] = k;
      j["rescale"] = rescale;
      break;
    case ExperimentKind::PropSuite: break;
  }
  if (model) j["model"] = model_config_to_json(*model);
  return nlohmann::json::parse(j.dump());
}

ExperimentConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  if (!j.contains("experiment")) throw Error(ErrorCode::ParseError, "config lacks \"experiment\"");
  ExperimentConfig c;
  try {
    c.experiment = experiment_kind_from_string(j.at("experiment").get<std::string>());
    if (c.experiment == ExperimentKind::ToyEdgeDetection) c.lr = 1e-2;

    for (const auto& [key, v] : j.items()) {
      if (key == "experiment") continue;
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "output") c.output = v.get<std::string>();
      else if (key == "depths") c.depths = v.get<std::vector<int>>();
      else if (key == "models") c.models = v.get<std::vector<std::string>>();
      else if (key == "variants") c.variants = v.get<std::vector<std::string>>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "model") c.model = model_config_from_json(v);
      else if (key == "pair") c.pair = v.get<std::string>();
      else if (key == "g1") c.g1 = v.get<std::string>();
      else if (key == "g2") c.g2 = v.get<std::string>();
      else if (key == "method") c.method = v.get<std::string>();
      else if (key == "graph") c.graph = v.get<std::string>();
      else if (key == "kind") c.kind = v.get<std::string>();
      else if (key == "k") c.k = v.get<std::size_t>();
      else if (key == "rescale") c.rescale = v.get<bool>();
      else throw Error(ErrorCode::UnknownField, key);
    }

    // Validate enums and references now so runs fail before any work.
    for (const auto& m : c.models)
      if (m != "gcn" && m != "ckgcn") throw Error(ErrorCode::ParseError, "unknown model '" + m + "'");
    for (const auto& v : c.variants) edge_variant_from_string(v);
    for (const int d : c.depths)
      if (d < 1) throw Error(ErrorCode::ParseError, "depths must be positive");
    if (c.epochs < 0) throw Error(ErrorCode::ParseError, "epochs must be non-negative");
    if (c.experiment == ExperimentKind::WLProbe) {
      wl_method_from_string(c.method);
      if (!c.pair.empty()) builtin_wl_pair(c.pair);
      else if (c.g1.empty() || c.g2.empty())
        throw Error(ErrorCode::ParseError, "WLProbe needs \"pair\" or both \"g1\" and \"g2\"");
      for (const auto* path : {&c.g1, &c.g2})
        if (!path->empty() && !std::filesystem::exists(*path))
          throw Error(ErrorCode::ParseError, "graph file not found: " + *path);
    }
    if (c.experiment == ExperimentKind::PEDump) {
      pe_kind_from_string(c.kind);
      if (c.graph.empty()) throw Error(ErrorCode::ParseError, "PEDump needs \"graph\"");
      if (!std::filesystem::exists(c.graph))
        throw Error(ErrorCode::ParseError, "graph file not found: " + c.graph);
      if (c.k < 1) throw Error(ErrorCode::ParseError, "k must be at least 1");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::ParseError, e.what());
    throw;
  }
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return parse_config_json(j);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << content;
}

void print_table(const std::vector<RunRecord>& records, std::ostream& out) {
  out << std::left << std::setw(16) << "experiment" << std::setw(10) << "variant" << std::setw(6)
      << "seed" << std::setw(14) << "loss" << "accuracy\n";
  for (const auto& r : records) {
    std::ostringstream loss;
    loss << std::scientific << std::setprecision(3) << r.loss;
    out << std::left << std::setw(16) << r.experiment << std::setw(10) << r.variant << std::setw(6)
        << r.seed << std::setw(14) << loss.str() << r.accuracy << "\n";
  }
}

int report_checks(const std::vector<CheckResult>& checks, std::ostream& out) {
  int failures = 0;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << "  [" << c.detail << "]";
    out << "\n";
    failures += c.passed ? 0 : 1;
  }
  return failures;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, bool check, std::ostream& out) {
  if (cfg.experiment != ExperimentKind::WLProbe && cfg.experiment != ExperimentKind::PEDump)
    out << "config " << cfg.to_json().dump() << "\n";
  switch (cfg.experiment) {
    case ExperimentKind::ToyOversmoothing:
    case ExperimentKind::ToyEdgeDetection: {
      std::vector<std::function<RunRecord()>> jobs;
      if (cfg.experiment == ExperimentKind::ToyOversmoothing) {
        for (const int depth : cfg.depths)
          for (const auto& m : cfg.models)
            for (const auto seed : cfg.seeds) {
              const auto kind = m == "gcn" ? ModelKind::GCN : ModelKind::CKGCN;
              jobs.emplace_back([=, &cfg] {
                return run_toy_oversmoothing_once(depth, kind, seed, cfg.epochs, cfg.lr, cfg.model);
              });
            }
      } else {
        for (const auto& v : cfg.variants)
          for (const auto seed : cfg.seeds) {
            const auto variant = edge_variant_from_string(v);
            jobs.emplace_back([=, &cfg] {
              return run_toy_edge_detection_once(variant, seed, cfg.epochs, cfg.lr, cfg.model);
            });
          }
      }
      const auto records = run_parallel(jobs);
      const auto text = metrics_jsonl(records);
      if (!cfg.output.empty()) write_file(cfg.output, text);
      print_table(records, out);
      if (!check) return 0;
      return report_checks(check_toy_metrics(parse_metrics_jsonl(text)), out) == 0 ? 0 : 1;
    }
    case ExperimentKind::PropSuite: {
      const auto seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
      const auto checks = run_prop_suite(seed);
      std::string text;
      for (const auto& c : checks) {
        nlohmann::ordered_json j;
        j["experiment"] = "prop-suite";
        j["check"] = c.name;
        j["passed"] = c.passed;
        j["detail"] = c.detail;
        text += j.dump() + "\n";
      }
      if (!cfg.output.empty()) write_file(cfg.output, text);
      return report_checks(checks, out) == 0 ? 0 : 1;
    }
    case ExperimentKind::WLProbe: {
      const auto method = wl_method_from_string(cfg.method);
      const auto [g1, g2] = cfg.pair.empty()
                                ? std::pair<Graph, Graph>{load_graph(cfg.g1), load_graph(cfg.g2)}
                                : builtin_wl_pair(cfg.pair);
      const auto text = distinguishes(g1, g2, method).to_json().dump() + "\n";
      if (!cfg.output.empty()) write_file(cfg.output, text);
      out << text;
      return 0;
    }
    case ExperimentKind::PEDump: {
      const auto g = load_graph(cfg.graph);
      const auto kind = pe_kind_from_string(cfg.kind);
      PseudoCoordinateField field = kind == PEKind::RRWP ? rrwp(g, cfg.k, cfg.rescale)
                                    : kind == PEKind::SPD ? spd_field(g)
                                                          : rd_field(g);
      const auto text = field.to_json().dump() + "\n";
      if (!cfg.output.empty()) write_file(cfg.output, text);
      out << text;
      return 0;
    }
  }
  return 0;
}

}  // namespace ckg
