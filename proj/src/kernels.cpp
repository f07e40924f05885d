#include "ckg/kernels.hpp"

#include <cmath>

#include "ckg/error.hpp"
#include "ckg/rng.hpp"

namespace ckg {

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::None: return "none";
    case NormKind::BatchNorm: return "batchnorm";
    case NormKind::LayerNorm: return "layernorm";
  }
  return "none";
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "none" || s == "None") return NormKind::None;
  if (s == "batchnorm" || s == "BatchNorm") return NormKind::BatchNorm;
  if (s == "layernorm" || s == "LayerNorm") return NormKind::LayerNorm;
  throw Error(ErrorCode::InvalidArgument, "unknown norm '" + s + "'");
}

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::None: return "none";
    case Constraint::SoftmaxOverSupport: return "softmax";
    case Constraint::Softplus: return "softplus";
  }
  return "none";
}

Constraint constraint_from_string(const std::string& s) {
  if (s == "none" || s == "None") return Constraint::None;
  if (s == "softmax" || s == "SoftmaxOverSupport") return Constraint::SoftmaxOverSupport;
  if (s == "softplus" || s == "Softplus") return Constraint::Softplus;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel constraint '" + s + "'");
}

Linear Linear::create(ad::ParameterStore& store, const std::string& prefix, Eigen::Index in,
                      Eigen::Index out, Rng& init, bool with_bias) {
  Linear fc;
  fc.weight = &store.add(prefix + ".weight", out, in);
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  for (Eigen::Index k = 0; k < fc.weight->value.size(); ++k)
    fc.weight->value.data()[k] = init.uniform(-bound, bound);
  if (with_bias) fc.bias = &store.add(prefix + ".bias", 1, out);
  return fc;
}

ad::Tensor Linear::operator()(ad::Tape& tape, const ad::Tensor& x) const {
  if (bias == nullptr) return ad::linear(x, tape.param(*weight));
  return ad::linear(x, tape.param(*weight), tape.param(*bias));
}

NormLayer::NormLayer(ad::ParameterStore& store, const std::string& prefix, NormKind kind,
                     Eigen::Index width)
    : kind_(kind) {
  if (kind == NormKind::None) return;
  gamma_ = &store.add(prefix + ".gamma", 1, width);
  gamma_->value.setOnes();
  beta_ = &store.add(prefix + ".beta", 1, width);
}

ad::Tensor NormLayer::normalize(ad::Tape&, const ad::Tensor& x, const ForwardContext& ctx) {
  switch (kind_) {
    case NormKind::None: return x;
    case NormKind::BatchNorm: return ad::batch_norm(x, state_, ctx.training, eps);
    case NormKind::LayerNorm: return ad::layer_norm(x, eps);
  }
  return x;
}

ad::Tensor NormLayer::operator()(ad::Tape& tape, const ad::Tensor& x, const ForwardContext& ctx) {
  if (kind_ == NormKind::None) return x;
  const auto z = normalize(tape, x, ctx);
  return ad::add_row(ad::mul_row(z, tape.param(*gamma_)), tape.param(*beta_));
}

void KernelConfig::validate() const {
  if (in_dim < 1 || hidden_dim < 1 || out_dim < 1)
    throw Error(ErrorCode::InvalidArgument, "kernel dimensions must be positive");
  if (num_mlp_blocks < 0) throw Error(ErrorCode::InvalidArgument, "negative MLP block count");
  for (double p : {kernel_dropout, mlp_dropout})
    if (p < 0.0 || p >= 1.0) throw Error(ErrorCode::InvalidArgument, "dropout outside [0, 1)");
}

namespace {

ad::Tensor maybe_dropout(const ad::Tensor& x, double p, const ForwardContext& ctx) {
  if (!ctx.training || p <= 0.0) return x;
  if (ctx.rng == nullptr) throw Error(ErrorCode::InvalidArgument, "dropout needs an rng");
  return ad::dropout(x, p, *ctx.rng, true);
}

}  // namespace

ad::Tensor mlp_block(ad::Tape& tape, const ad::Tensor& x, MlpBlock& block, ad::Activation act,
                     double dropout, const ForwardContext& ctx) {
  if (x.cols() != block.fc1.in_dim())
    throw Error(ErrorCode::ShapeMismatch, "mlp block expects width " +
                                              std::to_string(block.fc1.in_dim()) + ", got " +
                                              std::to_string(x.cols()));
  auto h = maybe_dropout(ad::activation(block.norm1(tape, x, ctx), act), dropout, ctx);
  h = block.fc1(tape, h);
  h = maybe_dropout(ad::activation(block.norm2(tape, h, ctx), act), dropout, ctx);
  h = block.fc2(tape, h);
  return ad::add(x, h);
}

KernelFunction::KernelFunction(ad::ParameterStore& store, const std::string& prefix,
                               KernelConfig config, Rng& init)
    : config_(config) {
  config_.validate();
  const auto r = config_.hidden_dim;
  Eigen::Index width = config_.in_dim;
  if (config_.num_mlp_blocks > 0) {
    stem_ = Linear::create(store, prefix + ".stem", config_.in_dim, r, init);
    width = r;
  }
  for (int b = 0; b < config_.num_mlp_blocks; ++b) {
    const auto name = prefix + ".block" + std::to_string(b);
    MlpBlock block;
    block.norm1 = NormLayer(store, name + ".norm1", config_.norm, r);
    block.fc1 = Linear::create(store, name + ".fc1", r, r, init);
    block.norm2 = NormLayer(store, name + ".norm2", config_.norm, r);
    block.fc2 = Linear::create(store, name + ".fc2", r, r, init);
    blocks_.push_back(std::move(block));
  }
  final_norm_ = NormLayer(store, prefix + ".norm", config_.norm, width);
  final_fc_ = Linear::create(store, prefix + ".fc", width, config_.out_dim, init);
}

ad::Tensor KernelFunction::operator()(ad::Tape& tape, const ad::Tensor& p,
                                      const ForwardContext& ctx) {
  if (p.cols() != config_.in_dim)
    throw Error(ErrorCode::ShapeMismatch, "kernel expects " + std::to_string(config_.in_dim) +
                                              " input channels, got " + std::to_string(p.cols()));
  auto h = p;
  if (stem_.weight != nullptr) h = stem_(tape, h);
  for (auto& block : blocks_)
    h = mlp_block(tape, h, block, config_.activation, config_.mlp_dropout, ctx);
  h = final_fc_(tape, final_norm_(tape, h, ctx));
  return maybe_dropout(h, config_.kernel_dropout, ctx);
}

ad::Matrix KernelFunction::evaluate(const ad::Matrix& p) {
  ad::Tape tape;
  return (*this)(tape, tape.constant(p), ForwardContext{}).value();
}

ad::Tensor kernel_eval(ad::Tape& tape, KernelFunction& kf, const ad::Tensor& p,
                       const ForwardContext& ctx) {
  return kf(tape, p, ctx);
}

ad::Tensor constrain_coefficients(const ad::Tensor& c, const ad::SegmentIndex& index,
                                  Constraint mode) {
  if (static_cast<Eigen::Index>(index.num_rows()) != c.rows())
    throw Error(ErrorCode::ShapeMismatch, "coefficient rows differ from the support index");
  for (std::size_t i = 0; i < index.num_groups(); ++i)
    if (index.group_size(i) == 0)
      throw Error(ErrorCode::EmptyGroup, "support group " + std::to_string(i) + " is empty");
  switch (mode) {
    case Constraint::None: return c;
    case Constraint::SoftmaxOverSupport: return ad::segment_softmax(c, index);
    case Constraint::Softplus: return ad::softplus(c);
  }
  return c;
}

}  // namespace ckg
