#include "ckg/ckgconv.hpp"

#include <cmath>
#include <vector>

#include "ckg/error.hpp"

namespace ckg {

std::string to_string(ScalerKind s) {
  switch (s) {
    case ScalerKind::None: return "none";
    case ScalerKind::PostDegree: return "post";
    case ScalerKind::PEInjected: return "pe";
  }
  return "none";
}

ScalerKind scaler_kind_from_string(const std::string& s) {
  if (s == "none" || s == "None") return ScalerKind::None;
  if (s == "post" || s == "PostDegree") return ScalerKind::PostDegree;
  if (s == "pe" || s == "PEInjected") return ScalerKind::PEInjected;
  throw Error(ErrorCode::InvalidArgument, "unknown degree scaler '" + s + "'");
}

std::string to_string(Aggregation a) {
  return a == Aggregation::Sum ? "sum" : "mean";
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "mean" || s == "ScaledMean") return Aggregation::ScaledMean;
  if (s == "sum" || s == "Sum") return Aggregation::Sum;
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation '" + s + "'");
}

PairFeatures build_pair_features(const Graph& g, const PseudoCoordinateField& field,
                                 const SupportSpec& support, Eigen::Index edge_width) {
  const auto n = g.num_nodes();
  if (field.num_nodes() != n || support.sets.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "pseudo-coordinates or supports sized for another graph");
  if (edge_width > 0 && g.edge_attrs() && static_cast<Eigen::Index>(g.edge_attr_dim()) != edge_width)
    throw Error(ErrorCode::WidthMismatch, "edge attributes have width " +
                                              std::to_string(g.edge_attr_dim()) + ", expected " +
                                              std::to_string(edge_width));
  PairFeatures out;
  out.edge_width = edge_width;
  out.index.offsets.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (support.sets[i].empty())
      throw Error(ErrorCode::EmptySupport, "node " + std::to_string(i) + " has an empty support");
    out.index.offsets.push_back(out.index.offsets.back() + support.sets[i].size());
  }
  const auto k = static_cast<Eigen::Index>(field.width());
  const auto rows = static_cast<Eigen::Index>(out.index.offsets.back());
  out.features = ad::Matrix::Zero(rows, edge_width + k);
  out.degree_ratio = Vector::Zero(rows);
  out.index.source.reserve(static_cast<std::size_t>(rows));
  const Vector deg = degree_vector(g);

  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto j : support.sets[i]) {
      out.index.source.push_back(j);
      if (edge_width > 0 && g.edge_attrs()) {
        if (const auto e = g.edge_index(i, j))
          out.features.row(r).head(edge_width) =
              g.edge_attrs()->row(static_cast<Eigen::Index>(*e));
      }
      const auto p = field.at(i, j);
      for (Eigen::Index t = 0; t < k; ++t) out.features(r, edge_width + t) = p[t];
      const double di = deg(static_cast<Eigen::Index>(i));
      const double dj = deg(static_cast<Eigen::Index>(j));
      out.degree_ratio(r) = dj > 0.0 ? std::sqrt(di) / std::sqrt(dj) : 0.0;
      ++r;
    }
  }
  return out;
}

Vector conv_scalar(const Vector& x, const ScalarKernel& psi, const PseudoCoordinateField& field,
                   const SupportSpec& support, double bias) {
  const auto n = field.num_nodes();
  if (static_cast<std::size_t>(x.size()) != n || support.sets.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "signal, field and supports disagree on node count");
  Vector out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& supp = support.sets[i];
    if (supp.empty())
      throw Error(ErrorCode::EmptySupport, "node " + std::to_string(i) + " has an empty support");
    double acc = 0.0;
    for (const auto j : supp) acc += x(static_cast<Eigen::Index>(j)) * psi(field.at(i, j));
    out(static_cast<Eigen::Index>(i)) = acc / static_cast<double>(supp.size()) + bias;
  }
  return out;
}

namespace {

ad::Matrix pair_block(const PseudoCoordinateField& field, std::size_t i) {
  const auto n = field.num_nodes();
  const auto k = static_cast<Eigen::Index>(field.width());
  ad::Matrix p(static_cast<Eigen::Index>(n), k);
  for (std::size_t j = 0; j < n; ++j) {
    const auto v = field.at(i, j);
    for (Eigen::Index t = 0; t < k; ++t) p(static_cast<Eigen::Index>(j), t) = v[t];
  }
  return p;
}

}  // namespace

ad::Matrix conv_global_naive(const ad::Matrix& x, const BlockKernel& psi,
                             const PseudoCoordinateField& field) {
  const auto n = static_cast<Eigen::Index>(field.num_nodes());
  if (x.rows() != n) throw Error(ErrorCode::ShapeMismatch, "signal rows differ from node count");
  ad::Matrix out(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const ad::Matrix coeff = psi(pair_block(field, static_cast<std::size_t>(i)));
    if (coeff.rows() != n || coeff.cols() != x.cols())
      throw Error(ErrorCode::ShapeMismatch, "kernel output width differs from signal width");
    out.row(i) = x.cwiseProduct(coeff).colwise().sum() / static_cast<double>(n);
  }
  return out;
}

ad::Matrix conv_global_efficient(const ad::Matrix& x, const BlockKernel& psi,
                                 const PseudoCoordinateField& field) {
  const auto n = field.num_nodes();
  const auto k = static_cast<Eigen::Index>(field.width());
  if (x.rows() != static_cast<Eigen::Index>(n))
    throw Error(ErrorCode::ShapeMismatch, "signal rows differ from node count");

  // Sparse pattern S_i = {j : P(i, j) != 0}, all pairs stacked for one kernel call.
  std::vector<std::size_t> offsets{0}, source;
  std::vector<double> flat;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = field.at(i, j);
      bool nonzero = false;
      for (const double c : v) nonzero = nonzero || c != 0.0;
      if (!nonzero) continue;
      source.push_back(j);
      flat.insert(flat.end(), v.begin(), v.end());
    }
    offsets.push_back(source.size());
  }
  ad::Matrix p(static_cast<Eigen::Index>(source.size()) + 1, k);
  p.row(0).setZero();
  for (std::size_t r = 0; r < source.size(); ++r)
    for (Eigen::Index t = 0; t < k; ++t)
      p(static_cast<Eigen::Index>(r) + 1, t) = flat[r * static_cast<std::size_t>(k) + t];
  const ad::Matrix coeff = psi(p);
  if (coeff.cols() != x.cols())
    throw Error(ErrorCode::ShapeMismatch, "kernel output width differs from signal width");

  const Eigen::RowVectorXd psi0 = coeff.row(0);
  const Eigen::RowVectorXd base = psi0.cwiseProduct(x.colwise().mean());
  const double inv_n = 1.0 / static_cast<double>(n);
  ad::Matrix out(static_cast<Eigen::Index>(n), x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
    for (std::size_t r = offsets[i]; r < offsets[i + 1]; ++r)
      acc += x.row(static_cast<Eigen::Index>(source[r]))
                 .cwiseProduct(coeff.row(static_cast<Eigen::Index>(r) + 1) - psi0);
    out.row(static_cast<Eigen::Index>(i)) = acc * inv_n + base;
  }
  return out;
}

ad::Tensor degree_scaler_post(const ad::Tensor& x, const ad::Tensor& theta1,
                              const ad::Tensor& theta2, const Vector& degrees) {
  const Vector root = degrees.cwiseMax(0.0).cwiseSqrt();
  return ad::add(ad::mul_row(x, theta1), ad::mul_col(ad::mul_row(x, theta2), root));
}

ad::Tensor degree_scaler_pe(const ad::Tensor& p, const ad::Tensor& theta1, const ad::Tensor& theta2,
                            const ad::Tensor& theta3, const Vector& degree_ratio) {
  const auto injected = ad::mul_col(ad::mul_row(ad::mul_row(p, theta2), theta3), degree_ratio);
  return ad::add(ad::mul_row(p, theta1), injected);
}

ConvLayer::ConvLayer(ad::ParameterStore& store, const std::string& prefix, ConvConfig config,
                     Rng& init)
    : config_(config),
      kernel_(store, prefix + ".kernel", [&] {
        if (config.kernel.out_dim != config.in_dim)
          throw Error(ErrorCode::ShapeMismatch, "kernel output width must equal the signal width");
        return config.kernel;
      }(), init) {
  mix_ = Linear::create(store, prefix + ".mix", config_.in_dim, config_.out_dim, init);
  Eigen::Index width = 0;
  if (config_.scaler == ScalerKind::PostDegree) width = config_.out_dim;
  if (config_.scaler == ScalerKind::PEInjected) width = config_.kernel.in_dim;
  if (width == 0) return;
  const int count = config_.scaler == ScalerKind::PEInjected ? 3 : 2;
  for (int t = 0; t < count; ++t) {
    theta_[t] = &store.add(prefix + ".scaler.theta" + std::to_string(t + 1), 1, width);
    if (t == 0) theta_[t]->value.setOnes();
  }
}

ad::Tensor ConvLayer::operator()(ad::Tape& tape, const ad::Tensor& x, const PairFeatures& pairs,
                                 const Vector& degrees, const ForwardContext& ctx) {
  if (x.cols() != config_.in_dim)
    throw Error(ErrorCode::ShapeMismatch, "conv expects width " + std::to_string(config_.in_dim) +
                                              ", got " + std::to_string(x.cols()));
  const auto n = pairs.index.num_groups();
  if (static_cast<Eigen::Index>(n) != x.rows() || degrees.size() != x.rows())
    throw Error(ErrorCode::ShapeMismatch, "pair features built for another node count");
  for (std::size_t i = 0; i < n; ++i)
    if (pairs.index.group_size(i) == 0)
      throw Error(ErrorCode::EmptySupport, "node " + std::to_string(i) + " has an empty support");

  auto p = tape.constant(pairs.features);
  if (config_.scaler == ScalerKind::PEInjected)
    p = degree_scaler_pe(p, tape.param(*theta_[0]), tape.param(*theta_[1]), tape.param(*theta_[2]),
                         pairs.degree_ratio);
  auto coeff = kernel_(tape, p, ctx);
  coeff = constrain_coefficients(coeff, pairs.index, config_.kernel.constraint);

  std::vector<double> weight(n, 1.0);
  if (config_.aggregation == Aggregation::ScaledMean)
    for (std::size_t i = 0; i < n; ++i)
      weight[i] = 1.0 / static_cast<double>(pairs.index.group_size(i));
  auto y = mix_(tape, ad::segment_aggregate(x, coeff, pairs.index, weight));
  if (config_.scaler == ScalerKind::PostDegree)
    y = degree_scaler_post(y, tape.param(*theta_[0]), tape.param(*theta_[1]), degrees);
  return y;
}

ad::Tensor conv_depthwise(ad::Tape& tape, const ad::Tensor& x, ConvLayer& layer,
                          const PairFeatures& pairs, const Vector& degrees,
                          const ForwardContext& ctx) {
  return layer(tape, x, pairs, degrees, ctx);
}

DenseMatrix gcn_normalized_adjacency(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const DenseMatrix a = adjacency_matrix(g) + DenseMatrix::Identity(n, n);
  const Vector inv_root = (degree_vector(g).array() + 1.0).rsqrt().matrix();
  return inv_root.asDiagonal() * a * inv_root.asDiagonal();
}

ad::Tensor gcn_conv(ad::Tape& tape, const ad::Tensor& x, const Linear& fc, const DenseMatrix& a_hat) {
  if (a_hat.rows() != x.rows() || a_hat.cols() != x.rows())
    throw Error(ErrorCode::ShapeMismatch, "normalized adjacency does not match the signal");
  if (x.cols() != fc.in_dim())
    throw Error(ErrorCode::ShapeMismatch, "gcn weight expects width " + std::to_string(fc.in_dim()));
  auto h = ad::left_multiply(a_hat, ad::linear(x, tape.param(*fc.weight)));
  if (fc.bias != nullptr) h = ad::add_row(h, tape.param(*fc.bias));
  return h;
}

}  // namespace ckg
