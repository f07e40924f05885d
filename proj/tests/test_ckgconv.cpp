#include <doctest.h>

#include <cmath>

#include "ckg/ckgconv.hpp"
#include "ckg/error.hpp"
#include "ckg/rng.hpp"
#include "helpers.hpp"

using namespace ckg;
using testing::make;
using testing::random_matrix;

namespace {

ConvConfig conv_config(Eigen::Index d, Eigen::Index d_out, Eigen::Index pair_width, int blocks,
                       NormKind norm = NormKind::None) {
  ConvConfig c;
  c.in_dim = d;
  c.out_dim = d_out;
  c.kernel = KernelConfig{.in_dim = pair_width, .hidden_dim = 4, .out_dim = d,
                          .num_mlp_blocks = blocks, .norm = norm};
  return c;
}

// Direct double loop over supports.
ad::Matrix conv_oracle(const ad::Matrix& x, KernelFunction& kf, const Linear& mix,
                       const PseudoCoordinateField& field, const SupportSpec& support) {
  const auto n = static_cast<Eigen::Index>(field.num_nodes());
  ad::Matrix agg = ad::Matrix::Zero(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = support.sets[static_cast<std::size_t>(i)];
    for (const auto j : s) {
      const auto v = field.at(static_cast<std::size_t>(i), j);
      ad::Matrix p(1, static_cast<Eigen::Index>(v.size()));
      for (std::size_t t = 0; t < v.size(); ++t) p(0, static_cast<Eigen::Index>(t)) = v[t];
      agg.row(i) += x.row(static_cast<Eigen::Index>(j)).cwiseProduct(kf.evaluate(p).row(0));
    }
    agg.row(i) /= static_cast<double>(s.size());
  }
  ad::Matrix y = agg * mix.weight->value.transpose();
  y.rowwise() += mix.bias->value.row(0);
  return y;
}

}  // namespace

TEST_SUITE("ckgconv") {
  TEST_CASE("scalar convolution") {
    const auto g = make(2, {{0, 1}});
    const auto f = rrwp(g, 1, true);
    const auto s = make_support(g, SupportMode::global());
    Vector x(2);
    x << 2, 4;
    const auto one = [](std::span<const double>) { return 1.0; };
    CHECK(conv_scalar(x, one, f, s, 0.0) == Vector::Constant(2, 3.0));
    const auto zero = [](std::span<const double>) { return 0.0; };
    CHECK(conv_scalar(x, zero, f, s, 7.0) == Vector::Constant(2, 7.0));
  }

  TEST_CASE("linear kernel on rescaled 1-rrwp is a set layer") {
    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
      const auto g = graphs::random_connected(3 + rng.below(8), 0.3, rng);
      const auto n = g.num_nodes();
      const auto f = rrwp(g, 1, true);
      const auto s = make_support(g, SupportMode::global());
      Vector x(n);
      for (std::size_t i = 0; i < n; ++i) x(i) = rng.uniform(-1, 1);
      const double gamma = rng.uniform(-2, 2), beta = rng.uniform(-2, 2), b = rng.uniform(-1, 1);
      const auto psi = [&](std::span<const double> p) { return gamma * p[0] + beta; };
      const Vector got = conv_scalar(x, psi, f, s, b);
      const Vector want = (gamma * x).array() + beta * x.mean() + b;
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("pair features layout") {
    DenseMatrix ea(1, 2);
    ea << 5, 6;
    const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}};
    const auto g = Graph::build(3, e, {.edge_attrs = ea});
    const auto f = rrwp(g, 2, false);
    const auto pf = build_pair_features(g, f, make_support(g, SupportMode::global()), 2);
    CHECK(pf.index.offsets == std::vector<std::size_t>{0, 3, 6, 9});
    CHECK(pf.features.cols() == 4);
    // Row (0, 1) carries the edge attributes; row (0, 2) has none.
    CHECK(pf.features(1, 0) == 5);
    CHECK(pf.features(1, 1) == 6);
    CHECK(pf.features(1, 3) == 1);
    CHECK(pf.features.row(2).head(2).isZero(0.0));
    // Node 2 is isolated: d_2^{1/2} d_j^{-1/2} = 0 and 0^{-1/2} = 0.
    CHECK(pf.degree_ratio(1) == 1.0);
    CHECK(pf.degree_ratio(2) == 0.0);
    CHECK(pf.degree_ratio(6) == 0.0);

    CHECK_THROWS_AS(build_pair_features(g, f, make_support(g, SupportMode::global()), 3), Error);
    SupportSpec empty{SupportMode::global(), {{0}, {}, {2}}};
    try {
      build_pair_features(g, f, empty, 2);
      FAIL("expected EmptySupport");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::EmptySupport);
    }
  }

  TEST_CASE("degree scalers") {
    ad::Tape t;
    Rng rng(9);
    const ad::Matrix x = random_matrix(rng, 3, 2);
    const auto tx = t.constant(x);
    const auto ones = t.constant(ad::Matrix::Ones(1, 2));
    const auto zeros = t.constant(ad::Matrix::Zero(1, 2));
    Vector deg(3);
    deg << 4, 0, 1;
    CHECK(degree_scaler_post(tx, ones, zeros, deg).value() == x);
    const auto only2 = degree_scaler_post(tx, zeros, ones, deg).value();
    CHECK(only2.row(0) == 2.0 * x.row(0));
    CHECK(only2.row(1).isZero(0.0));

    CHECK(degree_scaler_pe(tx, ones, zeros, ones, deg).value() == x);
    CHECK(degree_scaler_pe(tx, ones, ones, zeros, deg).value() == x);
    // Regular graph: ratio 1, theta1 = 0 gives P back.
    CHECK(degree_scaler_pe(tx, zeros, ones, ones, Vector::Ones(3)).value() == x);
  }

  TEST_CASE("efficient global form equals the naive one") {
    Rng rng(10);
    ad::ParameterStore store;
    KernelFunction kf(store, "psi",
                      KernelConfig{.in_dim = 4, .hidden_dim = 6, .out_dim = 3, .num_mlp_blocks = 2,
                                   .norm = NormKind::LayerNorm},
                      rng);
    for (auto& p : store) p->value = random_matrix(rng, p->value.rows(), p->value.cols());
    const BlockKernel psi = [&](const ad::Matrix& p) { return kf.evaluate(p); };
    for (int t = 0; t < 5; ++t) {
      const auto g = graphs::random_connected(8, 0.2, rng);
      const auto f = rrwp(g, 4, true);
      const ad::Matrix x = random_matrix(rng, 8, 3);
      const auto naive = conv_global_naive(x, psi, f);
      CHECK((conv_global_efficient(x, psi, f) - naive).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(conv_global_efficient(ad::Matrix::Zero(8, 3), psi, f).isZero(0.0));
    }
    // Dense pattern: every pair has a nonzero coordinate.
    const auto dense = rrwp(graphs::complete(5), 3, false);
    const ad::Matrix x = random_matrix(rng, 5, 3);
    const BlockKernel psi3 = [&](const ad::Matrix& p) {
      ad::Matrix q(p.rows(), 4);
      q << p, p.col(0);
      return kf.evaluate(q);
    };
    CHECK((conv_global_efficient(x, psi3, dense) - conv_global_naive(x, psi3, dense))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  TEST_CASE("conv layer matches a per-pair oracle") {
    Rng rng(12);
    for (const auto mode : {SupportMode::global(), SupportMode::k_hop(1), SupportMode::k_hop(2)}) {
      const auto g = graphs::random_connected(7, 0.25, rng);
      const auto f = rrwp(g, 3, true);
      const auto s = make_support(g, mode);
      ad::ParameterStore store;
      ConvLayer layer(store, "conv", conv_config(2, 3, 3, 1), rng);
      for (auto& p : store) p->value = random_matrix(rng, p->value.rows(), p->value.cols());
      const auto pf = build_pair_features(g, f, s);
      const ad::Matrix x = random_matrix(rng, 7, 2);
      ad::Tape t;
      const auto y = conv_depthwise(t, t.constant(x), layer, pf, degree_vector(g)).value();
      const auto want = conv_oracle(x, layer.kernel(), layer.mix(), f, s);
      CHECK((y - want).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("unit mixing reduces to the scalar form") {
    Rng rng(13);
    const auto g = graphs::random_connected(6, 0.3, rng);
    const auto f = rrwp(g, 2, false);
    const auto s = make_support(g, SupportMode::k_hop(1));
    ad::ParameterStore store;
    ConvLayer layer(store, "conv", conv_config(1, 1, 2, 0), rng);
    layer.mix().weight->value(0, 0) = 1.0;
    layer.mix().bias->value(0, 0) = 0.0;
    const auto& fc = layer.kernel().final_fc();
    Vector x(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.uniform(-1, 1);
    const ScalarKernel psi = [&](std::span<const double> p) {
      return fc.weight->value(0, 0) * p[0] + fc.weight->value(0, 1) * p[1] + fc.bias->value(0, 0);
    };
    ad::Tape t;
    const auto y = layer(t, t.constant(x), build_pair_features(g, f, s), degree_vector(g), {});
    CHECK((y.value().col(0) - conv_scalar(x, psi, f, s, 0.0)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("constant kernel averages each channel over the support") {
    Rng rng(14);
    const auto g = graphs::random_connected(6, 0.3, rng);
    const auto s = make_support(g, SupportMode::k_hop(1));
    ad::ParameterStore store;
    ConvLayer layer(store, "conv", conv_config(2, 2, 3, 0), rng);
    layer.kernel().final_fc().weight->value.setZero();
    layer.kernel().final_fc().bias->value.setOnes();
    layer.mix().weight->value.setIdentity();
    const ad::Matrix x = random_matrix(rng, 6, 2);
    ad::Tape t;
    const auto y =
        layer(t, t.constant(x), build_pair_features(g, rrwp(g, 3, true), s), degree_vector(g), {});
    for (std::size_t i = 0; i < 6; ++i) {
      Eigen::RowVector2d m = Eigen::RowVector2d::Zero();
      for (const auto j : s.sets[i]) m += x.row(static_cast<Eigen::Index>(j));
      m /= static_cast<double>(s.sets[i].size());
      CHECK((y.value().row(static_cast<Eigen::Index>(i)) - m).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  TEST_CASE("conv layer is permutation equivariant") {
    Rng rng(15);
    const auto g = graphs::random_connected(8, 0.3, rng);
    ad::ParameterStore store;
    auto cfg = conv_config(3, 3, 4, 2);
    cfg.scaler = ScalerKind::PEInjected;
    ConvLayer layer(store, "conv", cfg, rng);
    for (auto& p : store) p->value = random_matrix(rng, p->value.rows(), p->value.cols());
    const ad::Matrix x = random_matrix(rng, 8, 3);
    const auto run = [&](const Graph& h, const ad::Matrix& xs) {
      ad::Tape t;
      const auto pf = build_pair_features(h, rrwp(h, 4, true), make_support(h, SupportMode::k_hop(2)));
      return ad::Matrix(layer(t, t.constant(xs), pf, degree_vector(h), {}).value());
    };
    const auto y = run(g, x);
    for (int trial = 0; trial < 5; ++trial) {
      const auto perm = rng.permutation(8);
      ad::Matrix px(8, 3);
      for (std::size_t i = 0; i < 8; ++i) px.row(static_cast<Eigen::Index>(perm[i])) = x.row(static_cast<Eigen::Index>(i));
      const auto py = run(g.permuted(perm), px);
      for (std::size_t i = 0; i < 8; ++i)
        CHECK((py.row(static_cast<Eigen::Index>(perm[i])) - y.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("scaler parameters") {
    Rng rng(16);
    ad::ParameterStore store;
    auto post = conv_config(2, 3, 4, 0);
    post.scaler = ScalerKind::PostDegree;
    ConvLayer a(store, "a", post, rng);
    CHECK(a.theta(1)->value == ad::Matrix::Ones(1, 3));
    CHECK(a.theta(2)->value == ad::Matrix::Zero(1, 3));
    CHECK(a.theta(3) == nullptr);
    auto pe = conv_config(2, 3, 4, 0);
    pe.scaler = ScalerKind::PEInjected;
    ConvLayer b(store, "b", pe, rng);
    CHECK(b.theta(3)->value.cols() == 4);
    CHECK_THROWS_AS(ConvLayer(store, "c", [] {
                      auto c = conv_config(2, 2, 3, 0);
                      c.kernel.out_dim = 1;
                      return c;
                    }(), rng),
                    Error);
  }

  TEST_CASE("gcn convolution") {
    const auto g = make(2, {{0, 1}});
    const auto a = gcn_normalized_adjacency(g);
    CHECK(a.isApproxToConstant(0.5));
    ad::ParameterStore store;
    Rng rng(0);
    auto fc = Linear::create(store, "fc", 1, 1, rng);
    fc.weight->value(0, 0) = 1.0;
    ad::Tape t;
    ad::Matrix x(2, 1);
    x << 1, 0;
    CHECK(gcn_conv(t, t.constant(x), fc, a).value().isApproxToConstant(0.5));

    // Constant signals stay constant on a regular graph.
    const auto c6 = graphs::cycle(6);
    auto fc2 = Linear::create(store, "fc2", 2, 2, rng);
    fc2.weight->value.setIdentity();
    ad::Matrix c = ad::Matrix::Constant(6, 2, 3.0);
    CHECK(gcn_conv(t, t.constant(c), fc2, gcn_normalized_adjacency(c6)).value().isApprox(c));
  }

  TEST_CASE("enum names") {
    for (const auto s : {ScalerKind::None, ScalerKind::PostDegree, ScalerKind::PEInjected})
      CHECK(scaler_kind_from_string(to_string(s)) == s);
    for (const auto a : {Aggregation::ScaledMean, Aggregation::Sum})
      CHECK(aggregation_from_string(to_string(a)) == a);
  }
}
