#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ckg/config.hpp"
#include "ckg/error.hpp"
#include "ckg/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Continuous kernel graph convolution toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  bool check = false;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_flag("--check", check, "Exit 1 when an acceptance threshold fails");

  std::string toy_name;
  std::size_t toy_seeds = 5;
  std::string toy_output;
  bool toy_check = false;
  auto* toy = app.add_subcommand("toy", "Run a toy experiment");
  toy->add_option("name", toy_name, "oversmoothing | edge-detection")
      ->required()
      ->check(CLI::IsMember({"oversmoothing", "edge-detection"}));
  toy->add_option("--seeds", toy_seeds, "Number of seeds (0..N-1)")->check(CLI::PositiveNumber);
  toy->add_option("--output", toy_output, "Metrics file (JSON lines)");
  toy->add_flag("--check", toy_check, "Exit 1 when an acceptance threshold fails");

  std::string pair, g1, g2, method = "wl1";
  auto* wl = app.add_subcommand("wl", "Color-refinement probe on a graph pair");
  auto* pair_opt = wl->add_option("--pair", pair, "Built-in pair (c6-vs-2c3)");
  auto* g1_opt = wl->add_option("--g1", g1, "First graph (JSON)")->check(CLI::ExistingFile);
  auto* g2_opt = wl->add_option("--g2", g2, "Second graph (JSON)")->check(CLI::ExistingFile);
  g1_opt->needs(g2_opt);
  g2_opt->needs(g1_opt);
  pair_opt->excludes(g1_opt)->excludes(g2_opt);
  wl->add_option("--method", method, "wl1 | gdwl-spd | gdwl-rd")
      ->check(CLI::IsMember({"wl1", "gdwl-spd", "gdwl-rd"}));

  std::string graph_path, kind = "rrwp";
  std::size_t k = 5;
  bool rescale = false;
  auto* dump = app.add_subcommand("pe-dump", "Write pseudo-coordinates of a graph as JSON");
  dump->add_option("--graph", graph_path, "Graph (JSON)")->required()->check(CLI::ExistingFile);
  dump->add_option("--kind", kind, "rrwp | spd | rd")->check(CLI::IsMember({"rrwp", "spd", "rd"}));
  dump->add_option("--k", k, "Encoding width (rrwp)")->check(CLI::PositiveNumber);
  dump->add_flag("--rescale", rescale, "Multiply RRWP by the node count");

  std::uint64_t grad_seed = 0;
  auto* grad = app.add_subcommand("gradcheck", "Compare backward gradients with central differences");
  grad->add_option("--seed", grad_seed, "Seed for the sampled points");

  CLI11_PARSE(app, argc, argv);

  try {
    ckg::ExperimentConfig cfg;
    if (*run) {
      return ckg::run_experiment(ckg::parse_config(config_path), check, std::cout);
    }
    if (*toy) {
      cfg.experiment = toy_name == "oversmoothing" ? ckg::ExperimentKind::ToyOversmoothing
                                                   : ckg::ExperimentKind::ToyEdgeDetection;
      if (cfg.experiment == ckg::ExperimentKind::ToyEdgeDetection) cfg.lr = 1e-2;
      cfg.seeds.clear();
      for (std::size_t s = 0; s < toy_seeds; ++s) cfg.seeds.push_back(s);
      cfg.output = toy_output;
      return ckg::run_experiment(cfg, toy_check, std::cout);
    }
    if (*wl) {
      if (pair.empty() && g1.empty()) pair = "c6-vs-2c3";
      cfg.experiment = ckg::ExperimentKind::WLProbe;
      cfg.pair = pair;
      cfg.g1 = g1;
      cfg.g2 = g2;
      cfg.method = method;
      return ckg::run_experiment(cfg, false, std::cout);
    }
    if (*dump) {
      cfg.experiment = ckg::ExperimentKind::PEDump;
      cfg.graph = graph_path;
      cfg.kind = kind;
      cfg.k = k;
      cfg.rescale = rescale;
      return ckg::run_experiment(cfg, false, std::cout);
    }
    if (*grad) {
      int failures = 0;
      for (const auto& c : ckg::check_gradients(grad_seed)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  [" << c.detail << "]\n";
        failures += c.passed ? 0 : 1;
      }
      return failures == 0 ? 0 : 1;
    }
  } catch (const ckg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
