#include "ckg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ckg/error.hpp"
#include "ckg/rng.hpp"
#include "ckg/wl.hpp"

namespace ckg {

namespace {

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

CheckResult bound_check(std::string name, double worst, double tol) {
  return {std::move(name), worst < tol, "max deviation " + sci(worst) + " (tol " + sci(tol) + ")"};
}

ad::Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                         double hi = 1.0) {
  ad::Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

/// Deterministic non-uniform weights so a sum-loss exercises every entry differently.
ad::Tensor weighted_sum(ad::Tape& tape, const ad::Tensor& t) {
  ad::Matrix w(t.rows(), t.cols());
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = std::sin(1.3 * static_cast<double>(k) + 0.7);
  return ad::sum(ad::mul(t, tape.constant(w)));
}

void randomize(ad::ParameterStore& store, Rng& rng, double scale = 0.5) {
  for (auto& p : store)
    for (Eigen::Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = rng.uniform(-scale, scale);
}

}  // namespace

std::vector<CheckResult> check_efficient_global(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const auto n = static_cast<std::size_t>(2 + rng.below(15));
    const auto k = static_cast<std::size_t>(1 + rng.below(5));
    const auto g = graphs::erdos_renyi(n, rng.uniform(0.1, 0.6), rng);
    const auto field = rrwp(g, k, rng.uniform() < 0.5);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(4));
    ad::ParameterStore store;
    KernelConfig kc;
    kc.in_dim = static_cast<Eigen::Index>(k);
    kc.hidden_dim = 6;
    kc.out_dim = d;
    kc.num_mlp_blocks = 2;
    kc.norm = NormKind::None;
    KernelFunction kf(store, "kernel", kc, rng);
    randomize(store, rng, 1.0);
    const BlockKernel psi = [&](const ad::Matrix& p) { return kf.evaluate(p); };
    const auto x = random_matrix(rng, static_cast<Eigen::Index>(n), d);
    const auto naive = conv_global_naive(x, psi, field);
    const auto fast = conv_global_efficient(x, psi, field);
    worst = std::max(worst, (naive - fast).cwiseAbs().maxCoeff());
  }
  return {bound_check("efficient global conv == naive", worst, 1e-9)};
}

std::vector<CheckResult> check_set_network_degeneration(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const auto n = static_cast<std::size_t>(2 + rng.below(12));
    const auto g = graphs::erdos_renyi(n, rng.uniform(0.1, 0.7), rng);
    const auto field = rrwp(g, 1, true);
    const auto support = make_support(g, SupportMode::global());
    const double gamma = rng.uniform(-2, 2), beta = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const ScalarKernel psi = [&](std::span<const double> p) { return gamma * p[0] + beta; };
    Vector x(static_cast<Eigen::Index>(n));
    for (auto& v : x) v = rng.uniform(-3, 3);
    const Vector out = conv_scalar(x, psi, field, support, b);
    const Vector expect = (gamma * x).array() + beta * x.mean() + b;
    worst = std::max(worst, (out - expect).cwiseAbs().maxCoeff());
  }
  return {bound_check("rescaled 1-RRWP + linear kernel == set-network layer", worst, 1e-10)};
}

std::vector<CheckResult> check_polynomial_filter(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const auto n = static_cast<std::size_t>(2 + rng.below(9));
    const auto order = static_cast<std::size_t>(rng.below(5));
    const auto k = order + 1;
    const auto g = graphs::random_connected(n, rng.uniform(0.0, 0.5), rng);
    const auto field = rrwp(g, k, false);
    const auto support = make_support(g, SupportMode::global());
    const auto pairs = build_pair_features(g, field, support);
    std::vector<double> coef(k);
    for (auto& c : coef) c = rng.uniform(-1, 1);

    ad::ParameterStore store;
    ConvConfig cc;
    cc.in_dim = cc.out_dim = 1;
    cc.kernel.in_dim = static_cast<Eigen::Index>(k);
    cc.kernel.hidden_dim = static_cast<Eigen::Index>(k);
    cc.kernel.out_dim = 1;
    cc.kernel.num_mlp_blocks = 0;
    cc.kernel.norm = NormKind::None;
    cc.scaler = ScalerKind::PEInjected;
    ConvLayer layer(store, "conv", cc, rng);
    // The 1/|supp| = 1/n scaling is absorbed into gamma.
    auto& w = store.get("conv.kernel.fc.weight").value;
    for (std::size_t c = 0; c < k; ++c) w(0, static_cast<Eigen::Index>(c)) = static_cast<double>(n) * coef[c];
    store.get("conv.kernel.fc.bias").value.setZero();
    store.get("conv.mix.weight").value.setOnes();
    store.get("conv.mix.bias").value.setZero();
    layer.theta(1)->value.setZero();
    layer.theta(2)->value.setOnes();
    layer.theta(3)->value.setOnes();

    const ad::Matrix x = random_matrix(rng, static_cast<Eigen::Index>(n), 1);
    ad::Tape tape;
    const ad::Matrix out = layer(tape, tape.constant(x), pairs, degree_vector(g), {}).value();

    const Vector dinv = degree_vector(g).cwiseSqrt().cwiseInverse();
    const DenseMatrix a_norm = dinv.asDiagonal() * adjacency_matrix(g) * dinv.asDiagonal();
    ad::Matrix expect = ad::Matrix::Zero(static_cast<Eigen::Index>(n), 1);
    ad::Matrix power = x;
    for (std::size_t c = 0; c < k; ++c) {
      expect += coef[c] * power;
      power = a_norm * power;
    }
    worst = std::max(worst, (out - expect).cwiseAbs().maxCoeff());
  }
  return {bound_check("linear kernel + degree injection == polynomial filter", worst, 1e-8)};
}

std::vector<CheckResult> check_layernorm_degree_cancellation(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::pair<std::size_t, std::size_t>> edges{
      {0, 1}, {0, 2}, {0, 3}, {0, 4}, {4, 5}, {5, 6}, {6, 7}, {1, 2}};
  const auto g = Graph::build(8, edges);
  const auto field = rrwp(g, 4, true);
  const auto support = make_support(g, SupportMode::k_hop(1));
  const auto pairs = build_pair_features(g, field, support);
  const Eigen::Index d = 4;
  const ad::Matrix x = random_matrix(rng, 8, d);

  auto run = [&](Aggregation agg) {
    ad::ParameterStore store;
    Rng init(seed + 1);
    ConvConfig cc;
    cc.in_dim = cc.out_dim = d;
    cc.kernel.in_dim = 4;
    cc.kernel.hidden_dim = 8;
    cc.kernel.out_dim = d;
    cc.aggregation = agg;
    ConvLayer layer(store, "conv", cc, init);
    store.get("conv.mix.bias").value.setZero();
    ad::Tape tape;
    const auto y = layer(tape, tape.constant(x), pairs, degree_vector(g), {});
    ad::BatchNormState bn;
    return std::pair<ad::Matrix, ad::Matrix>{ad::layer_norm(y, 0.0).value(),
                                             ad::batch_norm(y, bn, true).value()};
  };
  const auto [ln_sum, bn_sum] = run(Aggregation::Sum);
  const auto [ln_mean, bn_mean] = run(Aggregation::ScaledMean);
  const double ln_gap = (ln_sum - ln_mean).cwiseAbs().maxCoeff();
  const double bn_gap = (bn_sum - bn_mean).cwiseAbs().maxCoeff();
  return {bound_check("LayerNorm(sum agg) == LayerNorm(mean agg)", ln_gap, 1e-10),
          {"BatchNorm(sum agg) != BatchNorm(mean agg)", bn_gap > 1e-3,
           "max difference " + sci(bn_gap) + " (needs > 1e-3)"}};
}

std::vector<CheckResult> check_gradients(std::uint64_t seed, int points) {
  using ad::Tape;
  using ad::Tensor;
  using Op = std::function<Tensor(Tape&, const Tensor&)>;
  Rng rng(seed);
  const ad::Matrix c34 = random_matrix(rng, 3, 4);
  const ad::Matrix c35 = random_matrix(rng, 3, 5);
  const ad::Matrix w24 = random_matrix(rng, 2, 4);
  const ad::Matrix row4 = random_matrix(rng, 1, 4);
  const ad::Matrix other = random_matrix(rng, 5, 4);
  Vector col5(5);
  for (auto& v : col5) v = rng.uniform(-1, 1);
  ad::SegmentIndex seg{{0, 2, 3, 5}, {0, 1, 4, 2, 3}};
  const Vector targets = (Vector(5) << 1, 0, 1, 1, 0).finished();

  const std::vector<std::pair<std::string, Op>> ops{
      {"matmul", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::matmul(x, t.constant(c34.transpose()))); }},
      {"left_multiply", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::left_multiply(c35, x)); }},
      {"linear", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::linear(x, t.constant(w24), t.constant(row4.leftCols(2)))); }},
      {"add", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::add(x, ad::scale(x, 2.0))); }},
      {"sub", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::sub(t.constant(other), x)); }},
      {"mul", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::mul(x, x)); }},
      {"add_row", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::add_row(x, ad::mean_rows(x))); }},
      {"mul_row", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::mul_row(x, ad::sum_rows(x))); }},
      {"mul_col", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::mul_col(x, col5)); }},
      {"concat_cols", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::concat_cols(x, ad::gelu(x))); }},
      {"gelu", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::gelu(x)); }},
      {"relu", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::relu(x)); }},
      {"softplus", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::softplus(x)); }},
      {"sigmoid", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::sigmoid(x)); }},
      {"sum/mean", [&](Tape&, const Tensor& x) { return ad::add(ad::sum(ad::mul(x, x)), ad::mean(x)); }},
      {"batch_norm", [&](Tape& t, const Tensor& x) { ad::BatchNormState s; return weighted_sum(t, ad::batch_norm(x, s, true)); }},
      {"layer_norm", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::layer_norm(x)); }},
      {"segment_aggregate", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::segment_aggregate(x, ad::gelu(x), seg, {0.5, 1.0, 0.25})); }},
      {"segment_softmax", [&](Tape& t, const Tensor& x) { return weighted_sum(t, ad::segment_softmax(x, seg)); }},
      {"bce_with_logits", [&](Tape& t, const Tensor& x) { return ad::bce_with_logits(ad::matmul(x, t.constant(row4.transpose())), targets); }},
  };

  std::vector<CheckResult> out;
  for (const auto& [name, op] : ops) {
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
      ad::Matrix x = random_matrix(rng, 5, 4, -2, 2);
      if (name == "relu")
        for (Eigen::Index k = 0; k < x.size(); ++k)
          while (std::abs(x.data()[k]) < 1e-4) x.data()[k] = rng.uniform(-2, 2);
      worst = std::max(worst, ad::grad_check(op, x).max_rel_error);
    }
    out.push_back(bound_check("grad " + name, worst, 1e-5));
  }

  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    ModelConfig c;
    c.num_blocks = 1;
    c.hidden_dim = 3;
    c.node_attr_dim = 2;
    c.pe_k = 3;
    c.kernel_hidden_dim = 4;
    c.norm = NormKind::LayerNorm;
    c.scaler = ScalerKind::PostDegree;
    CKGCN model(c, seed + static_cast<std::uint64_t>(p));
    randomize(model.params(), rng);
    GraphAttributes attrs;
    attrs.node_attrs = random_matrix(rng, 5, 2);
    const auto g = Graph::build(5, std::vector<std::pair<std::size_t, std::size_t>>{
                                       {0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}},
                                attrs);
    const auto in = prepare_inputs(g, c);
    const ForwardContext train{true, nullptr};
    worst = std::max(worst, ad::grad_check_parameters(model.params(), [&](Tape& t) {
                       return weighted_sum(t, model.block(t, 0, model.stem(t, in), in, train));
                     }));
  }
  out.push_back(bound_check("grad CKGConv block (all parameters)", worst, 1e-5));
  return out;
}

std::vector<CheckResult> check_wl_probe(std::uint64_t seed) {
  Rng rng(seed);
  const auto [c6, two_c3] = builtin_wl_pair("c6-vs-2c3");
  const auto wl1 = distinguishes(c6, two_c3, WLMethod::WL1);
  const auto spd = distinguishes(c6, two_c3, WLMethod::GDWL_SPD);
  std::vector<CheckResult> out{
      {"wl1 cannot separate C6 / 2xC3", !wl1.distinguished,
       wl1.distinguished ? "distinguished" : "indistinguishable"},
      {"gdwl-spd separates C6 / 2xC3 at round 1", spd.distinguished && spd.round == 1,
       spd.round ? "first differing round " + std::to_string(*spd.round) : "indistinguishable"}};
  bool invariant = true;
  for (const auto method : {WLMethod::WL1, WLMethod::GDWL_SPD}) {
    for (const auto* g : {&c6, &two_c3}) {
      for (int t = 0; t < 20; ++t) {
        const auto perm = rng.permutation(g->num_nodes());
        invariant = invariant && !distinguishes(*g, g->permuted(perm), method).distinguished;
      }
    }
  }
  out.push_back({"WL histograms invariant under 20 relabelings", invariant, ""});
  return out;
}

std::vector<CheckResult> check_equivariance(std::uint64_t seed, int graphs, int perms) {
  Rng rng(seed);
  double conv_worst = 0.0, node_worst = 0.0, graph_worst = 0.0;
  for (int t = 0; t < graphs; ++t) {
    const auto n = static_cast<std::size_t>(4 + rng.below(7));
    GraphAttributes attrs;
    attrs.node_attrs = random_matrix(rng, static_cast<Eigen::Index>(n), 2);
    const auto base = graphs::random_connected(n, 0.3, rng);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : base.edges()) edges.emplace_back(e.u, e.v);
    const auto g = Graph::build(n, edges, attrs);

    ModelConfig node_cfg;
    node_cfg.num_blocks = 2;
    node_cfg.hidden_dim = 4;
    node_cfg.node_attr_dim = 2;
    node_cfg.pe_k = 4;
    node_cfg.kernel_hidden_dim = 4;
    node_cfg.scaler = ScalerKind::PostDegree;
    node_cfg.support = rng.uniform() < 0.5 ? SupportMode::global() : SupportMode::k_hop(2);
    ModelConfig graph_cfg = node_cfg;
    graph_cfg.head = HeadKind::GraphRegressor;
    graph_cfg.pooling = Pooling::Mean;
    CKGCN node_model(node_cfg, seed + 17 * static_cast<std::uint64_t>(t));
    CKGCN graph_model(graph_cfg, seed + 31 * static_cast<std::uint64_t>(t));
    randomize(node_model.params(), rng);
    randomize(graph_model.params(), rng);

    auto conv_out = [&](const Graph& h) {
      const auto in = prepare_inputs(h, node_cfg);
      ad::Tape tape;
      return ad::Matrix((*node_model.blocks()[0].conv)(tape, tape.constant(in.node_input.leftCols(2).replicate(1, 2)),
                                                         in.pairs, in.degrees, {})
                            .value());
    };
    auto node_out = [&](const Graph& h) {
      ad::Tape tape;
      return ad::Matrix(node_model.forward(tape, h).value());
    };
    auto graph_out = [&](const Graph& h) {
      ad::Tape tape;
      return ad::Matrix(graph_model.forward(tape, h).value());
    };
    const auto conv_ref = conv_out(g);
    const auto node_ref = node_out(g);
    const auto graph_ref = graph_out(g);
    for (int p = 0; p < perms; ++p) {
      const auto perm = rng.permutation(n);
      const auto h = g.permuted(perm);
      const auto conv_p = conv_out(h);
      const auto node_p = node_out(h);
      for (std::size_t i = 0; i < n; ++i) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(perm[i]);
        conv_worst = std::max(conv_worst, (conv_ref.row(a) - conv_p.row(b)).cwiseAbs().maxCoeff());
        node_worst = std::max(node_worst, (node_ref.row(a) - node_p.row(b)).cwiseAbs().maxCoeff());
      }
      graph_worst = std::max(graph_worst, (graph_ref - graph_out(h)).cwiseAbs().maxCoeff());
    }
  }
  return {bound_check("conv permutation equivariance", conv_worst, 1e-8),
          bound_check("node-head permutation equivariance", node_worst, 1e-8),
          bound_check("graph-head permutation invariance", graph_worst, 1e-8)};
}

std::vector<CheckResult> check_rrwp(std::uint64_t seed, int graphs) {
  Rng rng(seed);
  double worst = 0.0;
  bool identity_exact = true;
  for (int t = 0; t < graphs; ++t) {
    const auto n = static_cast<std::size_t>(1 + rng.below(16));
    const auto g = graphs::erdos_renyi(n, rng.uniform(0.05, 0.8), rng);
    const auto k = static_cast<std::size_t>(1 + rng.below(8));
    const auto field = rrwp(g, k, false);
    const Vector deg = degree_vector(g);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) identity_exact = identity_exact && field.at(i, j)[0] == (i == j ? 1.0 : 0.0);
      if (deg(static_cast<Eigen::Index>(i)) == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += field.at(i, j)[c];
        worst = std::max(worst, std::abs(row - 1.0));
      }
    }
  }
  return {bound_check("RRWP rows sum to 1 per power", worst, 1e-12),
          {"RRWP zeroth channel is the identity", identity_exact, ""}};
}

std::vector<CheckResult> run_prop_suite(std::uint64_t seed) {
  std::vector<CheckResult> all;
  for (auto&& part : {check_efficient_global(seed), check_set_network_degeneration(seed),
                      check_polynomial_filter(seed), check_layernorm_degree_cancellation(seed),
                      check_gradients(seed), check_wl_probe(seed), check_equivariance(seed),
                      check_rrwp(seed)})
    all.insert(all.end(), part.begin(), part.end());
  return all;
}

}  // namespace ckg
