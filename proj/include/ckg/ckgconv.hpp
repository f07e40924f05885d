#pragma once

#include <functional>
#include <span>
#include <string>

#include "ckg/kernels.hpp"
#include "ckg/pseudo_coords.hpp"

namespace ckg {

enum class ScalerKind { None, PostDegree, PEInjected };
enum class Aggregation { ScaledMean, Sum };

std::string to_string(ScalerKind s);
ScalerKind scaler_kind_from_string(const std::string& s);
std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

/// One row per (i, j) pair with j in supp(i), grouped by i.
/// Row layout: [edge attrs of (i, j) or zeros | P(i, j)].
struct PairFeatures {
  ad::SegmentIndex index;
  ad::Matrix features;
  /// d_i^{1/2} d_j^{-1/2} per row, with 0^{-1/2} = 0.
  Vector degree_ratio;
  Eigen::Index edge_width = 0;
};

/// Throws EmptySupport, WidthMismatch (edge attribute width != edge_width).
PairFeatures build_pair_features(const Graph& g, const PseudoCoordinateField& field,
                                 const SupportSpec& support, Eigen::Index edge_width = 0);

/// Per-node scalar kernel used by the numeric reference convolutions.
using ScalarKernel = std::function<double(std::span<const double>)>;
/// Row-wise kernel on a block of pseudo-coordinates, [m, K] -> [m, d].
using BlockKernel = std::function<ad::Matrix(const ad::Matrix&)>;

/// out(i) = (1 / |supp(i)|) sum_{j in supp(i)} x(j) psi(P(i, j)) + b.
Vector conv_scalar(const Vector& x, const ScalarKernel& psi, const PseudoCoordinateField& field,
                   const SupportSpec& support, double bias);

/// Global-support convolution evaluated pair by pair, [n, d] -> [n, d].
ad::Matrix conv_global_naive(const ad::Matrix& x, const BlockKernel& psi,
                             const PseudoCoordinateField& field);
/// Same value using only the pairs with a nonzero pseudo-coordinate plus psi(0).
ad::Matrix conv_global_efficient(const ad::Matrix& x, const BlockKernel& psi,
                                 const PseudoCoordinateField& field);

/// x * theta1 + sqrt(d_i) x * theta2 (theta as [1, d] rows).
ad::Tensor degree_scaler_post(const ad::Tensor& x, const ad::Tensor& theta1,
                              const ad::Tensor& theta2, const Vector& degrees);
/// P * theta1 + d_i^{1/2} d_j^{-1/2} P * theta2 * theta3, per pair row.
ad::Tensor degree_scaler_pe(const ad::Tensor& p, const ad::Tensor& theta1, const ad::Tensor& theta2,
                            const ad::Tensor& theta3, const Vector& degree_ratio);

struct ConvConfig {
  Eigen::Index in_dim = 1;   // d
  Eigen::Index out_dim = 1;  // d'
  KernelConfig kernel;       // kernel.in_dim = pair width, kernel.out_dim = d
  ScalerKind scaler = ScalerKind::None;
  Aggregation aggregation = Aggregation::ScaledMean;
};

/// Depthwise separable continuous-kernel convolution:
/// W (agg_j chi(j) * psi(P(i, j))) + b, optionally degree scaled.
class ConvLayer {
 public:
  ConvLayer(ad::ParameterStore& store, const std::string& prefix, ConvConfig config, Rng& init);

  const ConvConfig& config() const { return config_; }
  KernelFunction& kernel() { return kernel_; }
  Linear& mix() { return mix_; }
  ad::Parameter* theta(int k) { return theta_[k - 1]; }

  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x, const PairFeatures& pairs,
                        const Vector& degrees, const ForwardContext& ctx);

 private:
  ConvConfig config_;
  KernelFunction kernel_;
  Linear mix_;
  ad::Parameter* theta_[3] = {nullptr, nullptr, nullptr};
};

/// Throws ShapeMismatch, EmptySupport.
ad::Tensor conv_depthwise(ad::Tape& tape, const ad::Tensor& x, ConvLayer& layer,
                          const PairFeatures& pairs, const Vector& degrees,
                          const ForwardContext& ctx = {});

/// (D + I)^{-1/2} (A + I) (D + I)^{-1/2}.
DenseMatrix gcn_normalized_adjacency(const Graph& g);
/// A_hat x W^T (+ b), W: [d', d].
ad::Tensor gcn_conv(ad::Tape& tape, const ad::Tensor& x, const Linear& fc, const DenseMatrix& a_hat);

}  // namespace ckg
