#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ckg/ckgconv.hpp"

namespace ckg {

enum class HeadKind { NodeBinary, NodeClassifier, GraphRegressor, GraphClassifier };
enum class Pooling { None, Sum, Mean };

std::string to_string(HeadKind h);
HeadKind head_kind_from_string(const std::string& s);
std::string to_string(Pooling p);
Pooling pooling_from_string(const std::string& s);

struct ModelConfig {
  int num_blocks = 1;
  Eigen::Index hidden_dim = 16;
  Eigen::Index node_attr_dim = 0;
  Eigen::Index edge_attr_dim = 0;

  PEKind pe_kind = PEKind::RRWP;
  std::size_t pe_k = 5;
  bool rescale_pe = true;
  bool standardize_pe = false;
  SupportMode support = SupportMode::global();

  // Kernel
  Eigen::Index kernel_hidden_dim = 16;
  int kernel_blocks = 2;
  NormKind kernel_norm = NormKind::BatchNorm;
  ad::Activation kernel_activation = ad::Activation::GELU;
  Constraint constraint = Constraint::None;
  double kernel_dropout = 0.0;
  double mlp_dropout = 0.0;

  // Main branch
  ScalerKind scaler = ScalerKind::None;
  Aggregation aggregation = Aggregation::ScaledMean;
  NormKind norm = NormKind::BatchNorm;
  bool residual = true;
  bool use_ffn = true;
  ad::Activation block_activation = ad::Activation::Identity;
  ad::Activation ffn_activation = ad::Activation::GELU;
  double dropout = 0.0;

  HeadKind head = HeadKind::NodeBinary;
  Eigen::Index num_classes = 1;
  Pooling pooling = Pooling::None;

  /// Throws InvalidArgument.
  void validate() const;
  /// Width of the pseudo-coordinate part of a pair row.
  Eigen::Index pe_width() const;
  Eigen::Index output_dim() const;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
/// Strict: unknown keys throw UnknownField, bad values ParseError. Missing keys keep defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Everything the network reads from a graph, computed once per graph.
struct GraphInputs {
  std::size_t n = 0;
  ad::Matrix node_input;  // [n, node_attr_dim + K]: [attrs | P(i, i)]
  PairFeatures pairs;
  Vector degrees;
};

/// Builds pseudo-coordinates, supports and stem inputs for g under config c.
/// Throws ConfigMismatch when g's attribute widths disagree with c.
GraphInputs prepare_inputs(const Graph& g, const ModelConfig& c);

struct Block {
  std::unique_ptr<ConvLayer> conv;
  NormLayer norm1;
  Linear ffn_in;
  Linear ffn_out;
  NormLayer norm2;
};

class CKGCN {
 public:
  CKGCN(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& params() { return store_; }
  std::vector<Block>& blocks() { return blocks_; }

  /// Node stem: FC over [attrs | P(i, i)]. Throws WidthMismatch.
  ad::Tensor stem(ad::Tape& tape, const GraphInputs& in);
  /// norm2(h + FFN(h)), h = norm1(x + conv(x)); each residual and the FFN switchable.
  ad::Tensor block(ad::Tape& tape, std::size_t b, const ad::Tensor& x, const GraphInputs& in,
                   const ForwardContext& ctx);
  ad::Tensor ffn(ad::Tape& tape, std::size_t b, const ad::Tensor& x);
  /// Node heads: [n, out]; graph heads: [1, out].
  ad::Tensor forward(ad::Tape& tape, const GraphInputs& in, const ForwardContext& ctx = {});
  ad::Tensor forward(ad::Tape& tape, const Graph& g, const ForwardContext& ctx = {});

  nlohmann::json checkpoint() const;
  /// Throws ConfigMismatch when the checkpoint was written for another configuration.
  void load_checkpoint(const nlohmann::json& j);

 private:
  ModelConfig config_;
  ad::ParameterStore store_;
  Linear stem_;
  std::vector<Block> blocks_;
  Linear head_;
};

struct GCNConfig {
  int num_layers = 2;
  Eigen::Index in_dim = 1;
  Eigen::Index hidden_dim = 16;
  Eigen::Index out_dim = 1;
};

/// h <- ReLU(A_hat h W^T + b) per layer, then a linear head.
class GCNNet {
 public:
  GCNNet(GCNConfig config, std::uint64_t init_seed);

  ad::ParameterStore& params() { return store_; }
  ad::Tensor forward(ad::Tape& tape, const ad::Matrix& x, const DenseMatrix& a_hat);

 private:
  GCNConfig config_;
  ad::ParameterStore store_;
  std::vector<Linear> layers_;
  Linear head_;
};

}  // namespace ckg
