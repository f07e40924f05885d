#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "ckg/error.hpp"
#include "ckg/training.hpp"

using namespace ckg;

TEST_SUITE("training") {
  TEST_CASE("binary cross-entropy") {
    CHECK(bce_loss(Vector::Constant(6, 0.5), Vector::Zero(6)) == doctest::Approx(std::log(2.0)));
    CHECK(bce_loss(Vector::Constant(1, 0.9), Vector::Ones(1)) == doctest::Approx(0.1053605157));
    Vector y(3);
    y << 1, 0, 1;
    CHECK(bce_loss(y, y) < 1e-11);
    CHECK(bce_loss_logits(Vector::Constant(1, std::log(9.0)), Vector::Ones(1)) ==
          doctest::Approx(0.1053605157));
    CHECK(bce_loss_logits(Vector::Constant(2, 800.0), Vector::Ones(2)) == 0.0);
    CHECK_THROWS_AS(bce_loss(Vector::Zero(2), Vector::Zero(3)), Error);
  }

  TEST_CASE("accuracy thresholds at probability one half") {
    Vector logits(4), y(4);
    logits << 2, -1, 0.1, -3;
    y << 1, 0, 0, 1;
    CHECK(binary_accuracy(logits, y) == 0.5);
  }

  TEST_CASE("adam first step moves by lr against the gradient sign") {
    ad::Matrix p(1, 3), g(1, 3);
    p << 1, 2, 3;
    g << 0.3, -5, 1e-3;
    OptimizerState st;
    AdamConfig cfg{.lr = 0.01};
    adam_step(st, cfg, {&p}, {&g});
    CHECK(p(0, 0) == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(p(0, 1) == doctest::Approx(2.01).epsilon(1e-6));
    CHECK(p(0, 2) == doctest::Approx(2.99).epsilon(1e-4));
    CHECK(st.step == 1);

    ad::Matrix q = ad::Matrix::Constant(2, 2, 4.0);
    const ad::Matrix zero = ad::Matrix::Zero(2, 2);
    OptimizerState s2;
    for (int i = 0; i < 3; ++i) adam_step(s2, cfg, {&q}, {&zero});
    CHECK(q == ad::Matrix::Constant(2, 2, 4.0));
  }

  TEST_CASE("adam second step follows the bias-corrected moments") {
    ad::Matrix p = ad::Matrix::Zero(1, 1);
    ad::Matrix g(1, 1);
    OptimizerState st;
    const AdamConfig cfg{.lr = 0.1};
    g << 1.0;
    adam_step(st, cfg, {&p}, {&g});
    g << -2.0;
    adam_step(st, cfg, {&p}, {&g});
    const double m = (0.9 * 0.1 * 1.0 + 0.1 * -2.0) / (1 - 0.81);
    const double v = (0.999 * 0.001 * 1.0 + 0.001 * 4.0) / (1 - 0.999 * 0.999);
    CHECK(p(0, 0) == doctest::Approx(-0.1 - 0.1 * m / (std::sqrt(v) + 1e-8)));
  }

  TEST_CASE("toy specifications") {
    const auto os = oversmoothing_toy_spec();
    CHECK(os.graph.num_nodes() == 6);
    CHECK(os.signals == os.labels);
    // Labels alternate along the cycle 0-1-3-5-4-2.
    const std::size_t ring[] = {0, 1, 3, 5, 4, 2};
    for (int k = 0; k < 6; ++k) CHECK(os.labels(ring[k]) != os.labels(ring[(k + 1) % 6]));
    CHECK(os.lr == 1e-3);
    CHECK(os.epochs == 200);

    const auto ed = edge_detection_toy_spec();
    Vector s(8), y(8);
    s << 1, 1, 0, 0, 1, 1, 0, 0;
    y << 0, 1, 1, 0, 0, 1, 1, 0;
    CHECK(ed.signals == s);
    CHECK(ed.labels == y);
  }

  TEST_CASE("training is bitwise repeatable") {
    const auto a = run_toy_oversmoothing_once(2, ModelKind::CKGCN, 3, 20);
    const auto b = run_toy_oversmoothing_once(2, ModelKind::CKGCN, 3, 20);
    CHECK(a.loss_history == b.loss_history);
    CHECK(metrics_line(a) == metrics_line(b));
    CHECK(a.variant == "ckgcn-2");
    CHECK(a.epoch_final == 20);
    const auto c = run_toy_oversmoothing_once(2, ModelKind::CKGCN, 4, 20);
    CHECK(c.loss_history != a.loss_history);
  }

  TEST_CASE("parallel runs keep job order") {
    std::vector<std::function<RunRecord()>> jobs;
    for (std::uint64_t s = 0; s < 6; ++s)
      jobs.emplace_back([s] { return run_toy_edge_detection_once(EdgeVariant::GCNConv, s, 5); });
    const auto out = run_parallel(jobs);
    for (std::uint64_t s = 0; s < 6; ++s) {
      CHECK(out[s].seed == s);
      CHECK(metrics_line(out[s]) == metrics_line(jobs[s]()));
    }
    CHECK(worker_count() >= 1);
  }

  TEST_CASE("metrics lines") {
    RunRecord r{"oversmoothing", "gcn-6", 2, 200, 0.6931, 0.5, {}};
    const auto line = metrics_line(r);
    CHECK(line.rfind("{\"experiment\":\"oversmoothing\",\"variant\":\"gcn-6\",\"seed\":2,", 0) == 0);
    const auto back = parse_metrics_jsonl(metrics_jsonl({r, r}));
    REQUIRE(back.size() == 2);
    CHECK(back[1].loss == r.loss);
    CHECK(back[1].accuracy == 0.5);
    CHECK_THROWS_AS(parse_metrics_jsonl("{\"experiment\": 3}\n"), Error);
  }

  TEST_CASE("toy checks apply the per-seed and mean rules") {
    std::vector<RunRecord> rs;
    for (std::uint64_t s = 0; s < 5; ++s) {
      rs.push_back({"edge-detection", "ckgconv", s, 200, s == 0 ? 0.5 : 1e-4, s == 0 ? 0.5 : 1.0, {}});
      rs.push_back({"edge-detection", "gcnconv", s, 200, 0.69, 0.5, {}});
      rs.push_back({"edge-detection", "softmax", s, 200, 0.69, s < 2 ? 0.75 : 0.5, {}});
      rs.push_back({"edge-detection", "softplus", s, 200, 0.6, 0.5 + 0.05 * s, {}});
    }
    const auto checks = check_toy_metrics(rs);
    REQUIRE(checks.size() == 4);
    CHECK(checks[0].passed);         // 4 of 5 seeds
    CHECK(checks[1].passed);         // mean 0.5
    CHECK_FALSE(checks[2].passed);   // mean 0.6
    CHECK(checks[3].passed);         // mean 0.6

    rs[0].accuracy = 0.5;
    rs[4].accuracy = 0.5;
    CHECK_FALSE(check_toy_metrics(rs)[0].passed);
  }

  TEST_CASE("edge variants") {
    for (const auto v : {EdgeVariant::CKGConv, EdgeVariant::GCNConv, EdgeVariant::Softmax,
                         EdgeVariant::Softplus})
      CHECK(edge_variant_from_string(to_string(v)) == v);
    const auto base = edge_detection_ckgcn_config(EdgeVariant::CKGConv);
    CHECK(base.constraint == Constraint::None);
    CHECK(apply_edge_variant(base, EdgeVariant::Softmax).constraint == Constraint::SoftmaxOverSupport);
    CHECK(apply_edge_variant(base, EdgeVariant::Softplus).constraint == Constraint::Softplus);
  }
}
