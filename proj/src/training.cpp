#include "ckg/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"

namespace ckg {

namespace {

void require_same_length(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " predictions vs " +
                                               std::to_string(b.size()) + " targets");
}

Vector as_vector(const ad::Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace

double bce_loss(const Vector& probs, const Vector& targets) {
  require_same_length(probs, targets);
  double total = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs(k), 1e-12, 1.0 - 1e-12);
    total -= targets(k) * std::log(p) + (1.0 - targets(k)) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

double bce_loss_logits(const Vector& logits, const Vector& targets) {
  require_same_length(logits, targets);
  double total = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const double z = logits(k);
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - targets(k) * z;
  }
  return total / static_cast<double>(logits.size());
}

double binary_accuracy(const Vector& logits, const Vector& targets) {
  require_same_length(logits, targets);
  int correct = 0;
  for (Eigen::Index k = 0; k < logits.size(); ++k)
    correct += ((logits(k) > 0.0) == (targets(k) > 0.5)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

void adam_step(OptimizerState& state, const AdamConfig& config, std::vector<ad::Matrix*> params,
               const std::vector<const ad::Matrix*>& grads) {
  if (params.size() != grads.size())
    throw Error(ErrorCode::ShapeMismatch, "parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(ad::Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(ad::Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "optimizer state tracks another parameter set");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = *grads[k];
    if (g.rows() != p.rows() || g.cols() != p.cols() || state.m[k].rows() != p.rows() ||
        state.m[k].cols() != p.cols())
      throw Error(ErrorCode::ShapeMismatch, "gradient shape differs from its parameter");
    state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * g;
    state.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * g.cwiseProduct(g);
    if (config.weight_decay > 0.0) p *= 1.0 - config.lr * config.weight_decay;
    const ad::Matrix m_hat = state.m[k] / c1;
    const ad::Matrix v_hat = state.v[k] / c2;
    p.array() -= config.lr * m_hat.array() / (v_hat.array().sqrt() + config.eps);
  }
}

Adam::Adam(ad::ParameterStore& store, AdamConfig config) : store_(store), config_(config) {}

void Adam::step() {
  std::vector<ad::Matrix*> params;
  std::vector<const ad::Matrix*> grads;
  for (auto& p : store_) {
    if (p->grad.size() == 0) p->grad = ad::Matrix::Zero(p->value.rows(), p->value.cols());
    params.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step(state_, config_, params, grads);
}

ToySpec oversmoothing_toy_spec() {
  ToySpec s;
  s.kind = ToyKind::Oversmoothing;
  s.graph = graphs::oversmoothing_toy();
  // Alternating around the cycle 0-1-3-5-4-2.
  s.signals = (Vector(6) << 0, 1, 1, 0, 0, 1).finished();
  s.labels = s.signals;
  s.epochs = 200;
  s.lr = 1e-3;
  s.seeds = {0, 1, 2, 3, 4};
  return s;
}

ToySpec edge_detection_toy_spec() {
  ToySpec s;
  s.kind = ToyKind::EdgeDetection;
  s.graph = graphs::edge_detection_toy();
  s.signals = (Vector(8) << 1, 1, 0, 0, 1, 1, 0, 0).finished();
  s.labels = (Vector(8) << 0, 1, 1, 0, 0, 1, 1, 0).finished();
  s.epochs = 200;
  s.lr = 1e-2;
  s.seeds = {0, 1, 2, 3, 4};
  return s;
}

RunRecord train_node_binary(ad::ParameterStore& store,
                            const std::function<ad::Tensor(ad::Tape&)>& logits,
                            const Vector& targets, int epochs, double lr) {
  Adam opt(store, AdamConfig{.lr = lr});
  RunRecord rec;
  rec.loss_history.reserve(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) {
    store.zero_grad();
    ad::Tape tape;
    const auto loss = ad::bce_with_logits(logits(tape), targets);
    rec.loss_history.push_back(loss.item());
    tape.backward(loss);
    opt.step();
  }
  ad::Tape tape;
  const Vector z = as_vector(logits(tape).value());
  rec.epoch_final = epochs;
  rec.loss = bce_loss_logits(z, targets);
  rec.accuracy = binary_accuracy(z, targets);
  return rec;
}

ModelConfig oversmoothing_ckgcn_config(int depth) {
  ModelConfig c;
  c.num_blocks = depth;
  c.hidden_dim = 16;
  c.node_attr_dim = 1;
  c.pe_kind = PEKind::RRWP;
  c.pe_k = 5;
  c.rescale_pe = true;
  c.kernel_hidden_dim = 16;
  c.kernel_blocks = 2;
  c.kernel_norm = NormKind::None;
  c.norm = NormKind::None;
  c.residual = false;
  c.use_ffn = false;
  c.block_activation = ad::Activation::GELU;
  c.head = HeadKind::NodeBinary;
  c.pooling = Pooling::None;
  return c;
}

namespace {

Graph with_signal(const Graph& g, const Vector& signal) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : g.edges()) edges.emplace_back(e.u, e.v);
  GraphAttributes attrs;
  attrs.node_attrs = DenseMatrix(signal);
  return Graph::build(g.num_nodes(), edges, attrs);
}

RunRecord train_ckgcn(const ToySpec& spec, const ModelConfig& config, std::uint64_t seed,
                      int epochs, double lr) {
  CKGCN model(config, seed);
  const auto inputs = prepare_inputs(with_signal(spec.graph, spec.signals), config);
  return train_node_binary(
      model.params(), [&](ad::Tape& tape) { return model.forward(tape, inputs); }, spec.labels,
      epochs, lr);
}

RunRecord train_gcn(const ToySpec& spec, int layers, Eigen::Index hidden, std::uint64_t seed,
                    int epochs, double lr) {
  GCNNet net(GCNConfig{layers, 1, hidden, 1}, seed);
  const auto a_hat = gcn_normalized_adjacency(spec.graph);
  const ad::Matrix x = spec.signals;
  return train_node_binary(
      net.params(), [&](ad::Tape& tape) { return net.forward(tape, x, a_hat); }, spec.labels,
      epochs, lr);
}

}  // namespace

RunRecord run_toy_oversmoothing_once(int depth, ModelKind kind, std::uint64_t seed, int epochs,
                                     double lr, const std::optional<ModelConfig>& model) {
  const auto spec = oversmoothing_toy_spec();
  RunRecord rec;
  if (kind == ModelKind::GCN) {
    rec = train_gcn(spec, depth, 16, seed, epochs, lr);
  } else {
    ModelConfig config = model.value_or(oversmoothing_ckgcn_config(depth));
    config.num_blocks = depth;
    rec = train_ckgcn(spec, config, seed, epochs, lr);
  }
  rec.experiment = "oversmoothing";
  rec.variant = (kind == ModelKind::GCN ? "gcn-" : "ckgcn-") + std::to_string(depth);
  rec.seed = seed;
  return rec;
}

std::vector<RunRecord> run_toy_oversmoothing(int depth, ModelKind kind,
                                             const std::vector<std::uint64_t>& seeds, int epochs,
                                             double lr, const std::optional<ModelConfig>& model) {
  std::vector<std::function<RunRecord()>> jobs;
  for (const auto s : seeds)
    jobs.emplace_back([=] { return run_toy_oversmoothing_once(depth, kind, s, epochs, lr, model); });
  return run_parallel(jobs);
}

std::string to_string(EdgeVariant v) {
  switch (v) {
    case EdgeVariant::CKGConv: return "ckgconv";
    case EdgeVariant::GCNConv: return "gcnconv";
    case EdgeVariant::Softmax: return "softmax";
    case EdgeVariant::Softplus: return "softplus";
  }
  return "ckgconv";
}

EdgeVariant edge_variant_from_string(const std::string& s) {
  if (s == "ckgconv") return EdgeVariant::CKGConv;
  if (s == "gcnconv") return EdgeVariant::GCNConv;
  if (s == "softmax") return EdgeVariant::Softmax;
  if (s == "softplus") return EdgeVariant::Softplus;
  throw Error(ErrorCode::InvalidArgument, "unknown edge-detection variant '" + s + "'");
}

ModelConfig edge_detection_ckgcn_config(EdgeVariant v) {
  ModelConfig c = oversmoothing_ckgcn_config(1);
  c.hidden_dim = 5;
  c.kernel_hidden_dim = 5;
  return apply_edge_variant(c, v);
}

ModelConfig apply_edge_variant(ModelConfig c, EdgeVariant v) {
  c.constraint = Constraint::None;
  c.aggregation = Aggregation::ScaledMean;
  if (v == EdgeVariant::Softmax) {
    c.constraint = Constraint::SoftmaxOverSupport;
    c.aggregation = Aggregation::Sum;
  } else if (v == EdgeVariant::Softplus) {
    c.constraint = Constraint::Softplus;
  }
  return c;
}

RunRecord run_toy_edge_detection_once(EdgeVariant variant, std::uint64_t seed, int epochs,
                                      double lr, const std::optional<ModelConfig>& model) {
  const auto spec = edge_detection_toy_spec();
  RunRecord rec;
  if (variant == EdgeVariant::GCNConv) {
    rec = train_gcn(spec, 1, 5, seed, epochs, lr);
  } else {
    const auto config = model ? apply_edge_variant(*model, variant)
                              : edge_detection_ckgcn_config(variant);
    rec = train_ckgcn(spec, config, seed, epochs, lr);
  }
  rec.experiment = "edge-detection";
  rec.variant = to_string(variant);
  rec.seed = seed;
  return rec;
}

std::vector<RunRecord> run_toy_edge_detection(EdgeVariant variant,
                                              const std::vector<std::uint64_t>& seeds, int epochs,
                                              double lr, const std::optional<ModelConfig>& model) {
  std::vector<std::function<RunRecord()>> jobs;
  for (const auto s : seeds)
    jobs.emplace_back([=] { return run_toy_edge_detection_once(variant, s, epochs, lr, model); });
  return run_parallel(jobs);
}

unsigned worker_count() {
  if (const char* env = std::getenv("CKG_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<RunRecord> run_parallel(const std::vector<std::function<RunRecord()>>& jobs) {
  std::vector<RunRecord> out(jobs.size());
  const auto workers = std::min<std::size_t>(worker_count(), jobs.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) out[k] = jobs[k]();
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < jobs.size(); k = next++) {
        try {
          out[k] = jobs[k]();
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string metrics_line(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["experiment"] = r.experiment;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["epoch_final"] = r.epoch_final;
  j["loss"] = r.loss;
  j["accuracy"] = r.accuracy;
  return j.dump();
}

std::string metrics_jsonl(const std::vector<RunRecord>& records) {
  std::string out;
  for (const auto& r : records) out += metrics_line(r) + "\n";
  return out;
}

std::vector<RunRecord> parse_metrics_jsonl(const std::string& text) {
  std::vector<RunRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RunRecord r;
      r.experiment = j.at("experiment").get<std::string>();
      r.variant = j.at("variant").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.epoch_final = j.at("epoch_final").get<int>();
      r.loss = j.at("loss").get<double>();
      r.accuracy = j.at("accuracy").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("metrics line: ") + e.what());
    }
  }
  return out;
}

namespace {

std::vector<const RunRecord*> select(const std::vector<RunRecord>& records, const std::string& exp,
                                     const std::string& variant) {
  std::vector<const RunRecord*> out;
  for (const auto& r : records)
    if (r.experiment == exp && r.variant == variant) out.push_back(&r);
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

CheckResult per_seed_check(const std::vector<RunRecord>& records, const std::string& exp,
                           const std::string& variant, const std::string& label,
                           const std::function<bool(const RunRecord&)>& ok) {
  const auto runs = select(records, exp, variant);
  std::size_t good = 0;
  std::string detail;
  for (const auto* r : runs) {
    good += ok(*r) ? 1 : 0;
    detail += " seed" + std::to_string(r->seed) + "(acc=" + fmt(r->accuracy) +
              ",loss=" + fmt(r->loss) + ")";
  }
  const std::size_t need = runs.size() >= 5 ? runs.size() - 1 : runs.size();
  CheckResult c;
  c.name = exp + "/" + variant + ": " + label;
  c.passed = !runs.empty() && good >= need;
  c.detail = std::to_string(good) + "/" + std::to_string(runs.size()) + " seeds ok;" + detail;
  return c;
}

CheckResult mean_acc_check(const std::vector<RunRecord>& records, const std::string& exp,
                           const std::string& variant, double lo, double hi) {
  const auto runs = select(records, exp, variant);
  double mean = 0.0;
  for (const auto* r : runs) mean += r->accuracy;
  if (!runs.empty()) mean /= static_cast<double>(runs.size());
  CheckResult c;
  c.name = exp + "/" + variant + ": mean acc in [" + fmt(lo) + ", " + fmt(hi) + "]";
  c.passed = !runs.empty() && mean >= lo - 1e-12 && mean <= hi + 1e-12;
  c.detail = "mean acc " + fmt(mean) + " over " + std::to_string(runs.size()) + " seeds";
  return c;
}

}  // namespace

std::vector<CheckResult> check_toy_metrics(const std::vector<RunRecord>& records) {
  std::vector<CheckResult> out;
  const bool has_os = std::any_of(records.begin(), records.end(),
                                  [](const RunRecord& r) { return r.experiment == "oversmoothing"; });
  const bool has_ed = std::any_of(records.begin(), records.end(), [](const RunRecord& r) {
    return r.experiment == "edge-detection";
  });
  const std::string os = "oversmoothing", ed = "edge-detection";
  if (has_os) {
    out.push_back(per_seed_check(records, os, "gcn-2", "acc 100%",
                                 [](const RunRecord& r) { return r.accuracy == 1.0; }));
    out.push_back(per_seed_check(records, os, "gcn-6", "acc 50%, loss 0.693 +- 0.01",
                                 [](const RunRecord& r) {
                                   return r.accuracy == 0.5 && std::abs(r.loss - 0.693) <= 0.01;
                                 }));
    out.push_back(per_seed_check(records, os, "ckgcn-2", "acc 100%, loss < 1e-3",
                                 [](const RunRecord& r) {
                                   return r.accuracy == 1.0 && r.loss < 1e-3;
                                 }));
    out.push_back(per_seed_check(records, os, "ckgcn-6", "acc 100%, loss <= 1e-6",
                                 [](const RunRecord& r) {
                                   return r.accuracy == 1.0 && r.loss <= 1e-6;
                                 }));
  }
  if (has_ed) {
    out.push_back(per_seed_check(records, ed, "ckgconv", "acc 100%, loss < 1e-3",
                                 [](const RunRecord& r) {
                                   return r.accuracy == 1.0 && r.loss < 1e-3;
                                 }));
    out.push_back(mean_acc_check(records, ed, "gcnconv", 0.0, 0.55));
    out.push_back(mean_acc_check(records, ed, "softmax", 0.0, 0.55));
    out.push_back(mean_acc_check(records, ed, "softplus", 0.50, 0.75));
  }
  return out;
}

}  // namespace ckg
