#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ckg/network.hpp"

namespace ckg {

/// Mean of -[y ln p + (1 - y) ln(1 - p)], p clamped to [1e-12, 1 - 1e-12].
/// Throws LengthMismatch.
double bce_loss(const Vector& probs, const Vector& targets);
/// Same loss taking logits, evaluated in the stable softplus form.
double bce_loss_logits(const Vector& logits, const Vector& targets);
/// Fraction of logits on the correct side of 0 (probability 0.5).
double binary_accuracy(const Vector& logits, const Vector& targets);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

struct OptimizerState {
  std::vector<ad::Matrix> m;
  std::vector<ad::Matrix> v;
  std::uint64_t step = 0;
};

class Adam {
 public:
  Adam(ad::ParameterStore& store, AdamConfig config);

  /// Applies one bias-corrected update from Parameter::grad. Throws ShapeMismatch.
  void step();
  const OptimizerState& state() const { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  ad::ParameterStore& store_;
  AdamConfig config_;
  OptimizerState state_;
};

/// One step: params = adam(params, grads) without a store (used by tests).
void adam_step(OptimizerState& state, const AdamConfig& config, std::vector<ad::Matrix*> params,
               const std::vector<const ad::Matrix*>& grads);

enum class ToyKind { Oversmoothing, EdgeDetection };

struct ToySpec {
  ToyKind kind = ToyKind::Oversmoothing;
  Graph graph;
  Vector signals;
  Vector labels;
  int epochs = 200;
  double lr = 1e-3;
  std::vector<std::uint64_t> seeds;
};

ToySpec oversmoothing_toy_spec();
ToySpec edge_detection_toy_spec();

struct RunRecord {
  std::string experiment;
  std::string variant;
  std::uint64_t seed = 0;
  int epoch_final = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> loss_history;  // per epoch, before the update; not serialized
};

/// Trains a scalar-logit-per-node model with BCE on logits and Adam.
/// `logits` must build the forward pass on the given tape.
RunRecord train_node_binary(ad::ParameterStore& store,
                            const std::function<ad::Tensor(ad::Tape&)>& logits,
                            const Vector& targets, int epochs, double lr);

enum class ModelKind { GCN, CKGCN };

/// Network used by the anti-oversmoothing toy at the given depth.
ModelConfig oversmoothing_ckgcn_config(int depth);
/// `model` replaces the default CKGCN configuration; its depth is set to `depth`.
RunRecord run_toy_oversmoothing_once(int depth, ModelKind kind, std::uint64_t seed,
                                     int epochs = 200, double lr = 1e-3,
                                     const std::optional<ModelConfig>& model = std::nullopt);
std::vector<RunRecord> run_toy_oversmoothing(int depth, ModelKind kind,
                                             const std::vector<std::uint64_t>& seeds,
                                             int epochs = 200, double lr = 1e-3,
                                             const std::optional<ModelConfig>& model = std::nullopt);

enum class EdgeVariant { CKGConv, GCNConv, Softmax, Softplus };

std::string to_string(EdgeVariant v);
EdgeVariant edge_variant_from_string(const std::string& s);
ModelConfig edge_detection_ckgcn_config(EdgeVariant v);
/// Applies the variant's constraint and aggregation to `base`.
ModelConfig apply_edge_variant(ModelConfig base, EdgeVariant v);
/// `model` replaces the default CKGCN configuration; constraint and aggregation follow the variant.
RunRecord run_toy_edge_detection_once(EdgeVariant variant, std::uint64_t seed, int epochs = 200,
                                      double lr = 1e-2,
                                      const std::optional<ModelConfig>& model = std::nullopt);
std::vector<RunRecord> run_toy_edge_detection(EdgeVariant variant,
                                              const std::vector<std::uint64_t>& seeds,
                                              int epochs = 200, double lr = 1e-2,
                                              const std::optional<ModelConfig>& model = std::nullopt);

/// Thread fan-out: CKG_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();
/// Runs jobs[0..n) on up to worker_count() threads; results keep job order.
std::vector<RunRecord> run_parallel(const std::vector<std::function<RunRecord()>>& jobs);

/// One JSON object per line with {experiment, variant, seed, epoch_final, loss, accuracy}.
std::string metrics_line(const RunRecord& r);
std::string metrics_jsonl(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_metrics_jsonl(const std::string& text);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Acceptance thresholds for the two toy tables, from metrics alone.
std::vector<CheckResult> check_toy_metrics(const std::vector<RunRecord>& records);

}  // namespace ckg
