#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ckg/config.hpp"
#include "ckg/error.hpp"

using namespace ckg;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised for " << text);
  return ErrorCode::InvalidArgument;
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("minimal config takes defaults") {
    const auto c = parse_config_text(R"({"experiment": "ToyOversmoothing"})");
    CHECK(c.experiment == ExperimentKind::ToyOversmoothing);
    CHECK(c.depths == std::vector<int>{2, 6});
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
    CHECK(c.lr == 1e-3);
    CHECK(c.epochs == 200);
    CHECK_FALSE(c.model.has_value());
    CHECK(parse_config_text(R"({"experiment": "ToyEdgeDetection"})").lr == 1e-2);
  }

  TEST_CASE("wl probe pair") {
    const auto c = parse_config_text(R"({"experiment": "WLProbe", "pair": "c6-vs-2c3"})");
    CHECK(c.pair == "c6-vs-2c3");
    std::ostringstream out;
    CHECK(run_experiment(c, false, out) == 0);
    const auto j = nlohmann::json::parse(out.str());
    CHECK(j["distinguished"] == false);
  }

  TEST_CASE("rejections") {
    CHECK(code_of(R"({"experiment": "Bogus"})") == ErrorCode::ParseError);
    CHECK(code_of(R"({"experiment": "ToyOversmoothing", "seed": 3})") == ErrorCode::UnknownField);
    CHECK(code_of(R"({"experiment": "ToyOversmoothing", "model": {"layers": 3}})") ==
          ErrorCode::UnknownField);
    CHECK(code_of(R"({"experiment": "ToyOversmoothing",)") == ErrorCode::ParseError);
    CHECK(code_of(R"({"experiment": "ToyOversmoothing", "epochs": "many"})") == ErrorCode::ParseError);
    CHECK(code_of(R"({"experiment": "ToyOversmoothing", "models": ["mlp"]})") == ErrorCode::ParseError);
    CHECK(code_of(R"({"experiment": "ToyEdgeDetection", "variants": ["gat"]})") == ErrorCode::ParseError);
    CHECK(code_of(R"({"experiment": "WLProbe", "method": "wl3", "pair": "c6-vs-2c3"})") ==
          ErrorCode::ParseError);
    CHECK(code_of(R"({"experiment": "PEDump"})") == ErrorCode::ParseError);
    CHECK(code_of(R"([1, 2])") == ErrorCode::ParseError);
    try {
      parse_config("/nonexistent/config.json");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }

  TEST_CASE("to_json round trip") {
    const auto c = parse_config_text(
        R"({"experiment": "ToyEdgeDetection", "seeds": [7], "variants": ["softplus"], "epochs": 3,
            "model": {"hidden_dim": 4, "kernel_hidden_dim": 4}})");
    const auto again = parse_config_json(c.to_json());
    CHECK(again.to_json() == c.to_json());
    CHECK(again.model->hidden_dim == 4);
  }

  TEST_CASE("same config writes the same metrics file") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto a = dir / "ckg_config_test_a.jsonl";
    const auto b = dir / "ckg_config_test_b.jsonl";
    auto c = parse_config_text(R"({"experiment": "ToyEdgeDetection", "seeds": [0, 1], "epochs": 10})");
    std::ostringstream sink;
    c.output = a.string();
    CHECK(run_experiment(c, false, sink) == 0);
    c.output = b.string();
    CHECK(run_experiment(c, false, sink) == 0);
    CHECK(read(a) == read(b));
    CHECK(!read(a).empty());
    std::filesystem::remove(a);
    std::filesystem::remove(b);
  }

  TEST_CASE("pe dump") {
    const auto path = std::filesystem::temp_directory_path() / "ckg_config_test_path2.json";
    {
      std::ofstream out(path);
      out << R"({"n": 2, "edges": [[0, 1]]})";
    }
    ExperimentConfig c;
    c.experiment = ExperimentKind::PEDump;
    c.graph = path.string();
    c.k = 2;
    c.rescale = true;
    std::ostringstream out;
    CHECK(run_experiment(c, false, out) == 0);
    CHECK(nlohmann::json::parse(out.str())["values"] ==
          nlohmann::json::parse("[[[2,0],[0,2]],[[0,2],[2,0]]]"));
    std::filesystem::remove(path);
  }
}
