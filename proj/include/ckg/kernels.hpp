#pragma once

#include <string>
#include <vector>

#include "ckg/autodiff.hpp"

namespace ckg {

enum class NormKind { None, BatchNorm, LayerNorm };
enum class Constraint { None, SoftmaxOverSupport, Softplus };

std::string to_string(NormKind k);
NormKind norm_kind_from_string(const std::string& s);
std::string to_string(Constraint c);
Constraint constraint_from_string(const std::string& s);

/// Mode flags threaded through every forward pass.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required only when dropout is active
};

/// FC(x) = x W^T + b with W: [out, in].
struct Linear {
  ad::Parameter* weight = nullptr;
  ad::Parameter* bias = nullptr;

  static Linear create(ad::ParameterStore& store, const std::string& prefix, Eigen::Index in,
                       Eigen::Index out, Rng& init, bool with_bias = true);
  Eigen::Index in_dim() const { return weight->value.cols(); }
  Eigen::Index out_dim() const { return weight->value.rows(); }
  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x) const;
};

/// Normalization with a learnable per-channel affine (gamma = 1, beta = 0 at init).
class NormLayer {
 public:
  NormLayer() = default;
  NormLayer(ad::ParameterStore& store, const std::string& prefix, NormKind kind, Eigen::Index width);

  NormKind kind() const { return kind_; }
  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x, const ForwardContext& ctx);
  /// Normalized value before the affine map.
  ad::Tensor normalize(ad::Tape& tape, const ad::Tensor& x, const ForwardContext& ctx);

  double eps = 1e-5;

 private:
  NormKind kind_ = NormKind::None;
  ad::Parameter* gamma_ = nullptr;
  ad::Parameter* beta_ = nullptr;
  ad::BatchNormState state_;
};

struct KernelConfig {
  Eigen::Index in_dim = 1;
  Eigen::Index hidden_dim = 1;
  Eigen::Index out_dim = 1;
  int num_mlp_blocks = 2;
  NormKind norm = NormKind::BatchNorm;
  ad::Activation activation = ad::Activation::GELU;
  Constraint constraint = Constraint::None;
  double kernel_dropout = 0.0;
  double mlp_dropout = 0.0;

  /// Throws InvalidArgument.
  void validate() const;
};

struct MlpBlock {
  NormLayer norm1;
  Linear fc1;
  NormLayer norm2;
  Linear fc2;
};

/// x + FC(sigma(Norm(FC(sigma(Norm(x)))))).
ad::Tensor mlp_block(ad::Tape& tape, const ad::Tensor& x, MlpBlock& block, ad::Activation act,
                     double dropout, const ForwardContext& ctx);

/// psi: pseudo-coordinates [m, in_dim] -> coefficients [m, out_dim].
///
/// With blocks: stem FC (in_dim -> r), the blocks, Norm, FC (r -> out_dim).
/// Without blocks the stem is omitted and psi is Norm then FC (in_dim -> out_dim),
/// so norm = None gives a single affine map.
class KernelFunction {
 public:
  KernelFunction(ad::ParameterStore& store, const std::string& prefix, KernelConfig config,
                 Rng& init);

  const KernelConfig& config() const { return config_; }
  const Linear& stem() const { return stem_; }
  const Linear& final_fc() const { return final_fc_; }
  std::vector<MlpBlock>& blocks() { return blocks_; }

  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& p, const ForwardContext& ctx);
  /// Evaluation-mode convenience on plain arrays.
  ad::Matrix evaluate(const ad::Matrix& p);

 private:
  KernelConfig config_;
  Linear stem_;
  std::vector<MlpBlock> blocks_;
  NormLayer final_norm_;
  Linear final_fc_;
};

ad::Tensor kernel_eval(ad::Tape& tape, KernelFunction& kf, const ad::Tensor& p,
                       const ForwardContext& ctx = {});

/// Softmax within each support group, elementwise softplus, or identity.
/// Throws EmptyGroup when a group has no rows.
ad::Tensor constrain_coefficients(const ad::Tensor& c, const ad::SegmentIndex& index,
                                  Constraint mode);

}  // namespace ckg
