#include "ckg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"
#include "ckg/rng.hpp"

namespace ckg::ad {

// ---------------------------------------------------------------------------
// Parameters

Parameter& ParameterStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (find(name) != nullptr)
    throw Error(ErrorCode::InvalidArgument, "duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw Error(ErrorCode::InvalidArgument, "no parameter named '" + std::string(name) + "'");
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p->value.size());
  return total;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

nlohmann::json ParameterStore::to_json() const {
  auto j = nlohmann::ordered_json::object();
  for (const auto& p : params_) {
    std::vector<double> flat(p->value.data(), p->value.data() + p->value.size());
    j[p->name] = {{"shape", {p->value.rows(), p->value.cols()}}, {"data", flat}};
  }
  return nlohmann::json::parse(j.dump());
}

void ParameterStore::load_json(const nlohmann::json& j) {
  for (auto& p : params_) {
    if (!j.contains(p->name))
      throw Error(ErrorCode::ConfigMismatch, "snapshot lacks parameter '" + p->name + "'");
    const auto& entry = j.at(p->name);
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = entry.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols() ||
        static_cast<Eigen::Index>(data.size()) != p->value.size())
      throw Error(ErrorCode::ShapeMismatch, "snapshot shape differs for '" + p->name + "'");
    std::copy(data.begin(), data.end(), p->value.data());
  }
}

// ---------------------------------------------------------------------------
// Tensor / Tape

const Matrix& Tensor::value() const { return tape_->value_of(id_); }
const Matrix& Tensor::grad() const { return tape_->grad_of(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

double Tensor::item() const {
  const auto& v = value();
  if (v.size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on a non-scalar tensor");
  return v(0, 0);
}

Tensor Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, nullptr});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, nullptr});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Tensor(this, it->second);
  nodes_.push_back(Node{p.value, {}, true, nullptr, &p});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Matrix value, std::vector<Tensor> inputs, BackwardFn fn) {
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  nodes_.push_back(Node{std::move(value), {}, needs_grad, needs_grad ? std::move(fn) : nullptr,
                        nullptr});
  return Tensor(this, nodes_.size() - 1);
}

Matrix& Tape::grad_slot(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(const Tensor& loss) {
  if (&loss.tape() != this) throw Error(ErrorCode::InvalidArgument, "loss lives on another tape");
  if (loss.value().size() != 1)
    throw Error(ErrorCode::NonScalarLoss, "loss has shape " + std::to_string(loss.rows()) + "x" +
                                              std::to_string(loss.cols()));
  for (auto& node : nodes_) node.grad.resize(0, 0);
  grad_slot(loss.node_id()).setOnes();
  for (std::size_t id = loss.node_id() + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.size() == 0) continue;
    node.backward(*this, node.grad);
  }
  for (auto& node : nodes_) {
    if (node.param == nullptr || node.grad.size() == 0) continue;
    if (node.param->grad.rows() != node.value.rows() || node.param->grad.cols() != node.value.cols())
      node.param->grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.param->grad += node.grad;
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch,
                std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

void require_row(const Tensor& a, const Tensor& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": row vector width mismatch");
}

Matrix map(const Matrix& x, double (*f)(double)) { return x.unaryExpr(f); }

double gelu_fn(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}
double relu_fn(double x) { return x > 0.0 ? x : 0.0; }
double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }
double softplus_fn(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid_fn(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor elementwise(const Tensor& x, double (*f)(double), double (*df)(double)) {
  const auto id = x.node_id();
  return x.tape().record(map(x.value(), f), {x}, [id, df](Tape& t, const Matrix& g) {
    t.grad_slot(id).array() += g.array() * map(t.value_of(id), df).array();
  });
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::GELU: return "gelu";
    case Activation::ReLU: return "relu";
    case Activation::Softplus: return "softplus";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "Identity") return Activation::Identity;
  if (s == "gelu" || s == "GELU") return Activation::GELU;
  if (s == "relu" || s == "ReLU") return Activation::ReLU;
  if (s == "softplus" || s == "Softplus") return Activation::Softplus;
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + s + "'");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions");
  const auto ia = a.node_id(), ib = b.node_id();
  return a.tape().record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia) += g * t.value_of(ib).transpose();
    if (t.requires_grad(ib)) t.grad_slot(ib) += t.value_of(ia).transpose() * g;
  });
}

Tensor left_multiply(const Matrix& c, const Tensor& x) {
  if (c.cols() != x.rows()) throw Error(ErrorCode::ShapeMismatch, "left_multiply dimensions");
  const auto ix = x.node_id();
  return x.tape().record(c * x.value(), {x}, [ix, c](Tape& t, const Matrix& g) {
    t.grad_slot(ix) += c.transpose() * g;
  });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (x.cols() != w.cols())
    throw Error(ErrorCode::ShapeMismatch, "linear: input width " + std::to_string(x.cols()) +
                                              " vs weight " + std::to_string(w.cols()));
  const auto ix = x.node_id(), iw = w.node_id();
  return x.tape().record(x.value() * w.value().transpose(), {x, w},
                         [ix, iw](Tape& t, const Matrix& g) {
                           if (t.requires_grad(ix)) t.grad_slot(ix) += g * t.value_of(iw);
                           if (t.requires_grad(iw))
                             t.grad_slot(iw) += g.transpose() * t.value_of(ix);
                         });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (b.value().size() != w.rows())
    throw Error(ErrorCode::ShapeMismatch, "linear: bias width differs from output width");
  const auto ib = b.node_id();
  const Tensor xw = linear(x, w);
  Matrix out = xw.value();
  const Eigen::Map<const Eigen::RowVectorXd> bias(b.value().data(), b.value().size());
  out.rowwise() += bias;
  const auto ixw = xw.node_id();
  return x.tape().record(std::move(out), {xw, b}, [ixw, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ixw)) t.grad_slot(ixw) += g;
    if (t.requires_grad(ib)) {
      auto& slot = t.grad_slot(ib);
      const Eigen::RowVectorXd colsum = g.colwise().sum();
      Eigen::Map<Eigen::RowVectorXd>(slot.data(), slot.size()) += colsum;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto ia = a.node_id(), ib = b.node_id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia) += g;
    if (t.requires_grad(ib)) t.grad_slot(ib) += g;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto ia = a.node_id(), ib = b.node_id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia) += g;
    if (t.requires_grad(ib)) t.grad_slot(ib) -= g;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto ia = a.node_id(), ib = b.node_id();
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia) += g.cwiseProduct(t.value_of(ib));
    if (t.requires_grad(ib)) t.grad_slot(ib) += g.cwiseProduct(t.value_of(ia));
  });
}

Tensor scale(const Tensor& a, double s) {
  const auto ia = a.node_id();
  return a.tape().record(a.value() * s, {a},
                         [ia, s](Tape& t, const Matrix& g) { t.grad_slot(ia) += g * s; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "add_row");
  const auto ia = a.node_id(), ir = row.node_id();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia) += g;
    if (t.requires_grad(ir)) t.grad_slot(ir) += g.colwise().sum();
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "mul_row");
  const auto ia = a.node_id(), ir = row.node_id();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia))
      t.grad_slot(ia).array() += g.array().rowwise() * t.value_of(ir).row(0).array();
    if (t.requires_grad(ir)) t.grad_slot(ir) += g.cwiseProduct(t.value_of(ia)).colwise().sum();
  });
}

Tensor mul_col(const Tensor& a, const Vector& col) {
  if (col.size() != a.rows()) throw Error(ErrorCode::ShapeMismatch, "mul_col: length mismatch");
  const auto ia = a.node_id();
  Matrix out = a.value().array().colwise() * col.array();
  return a.tape().record(std::move(out), {a}, [ia, col](Tape& t, const Matrix& g) {
    t.grad_slot(ia).array() += g.array().colwise() * col.array();
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "concat_cols: row counts differ");
  const auto ia = a.node_id(), ib = b.node_id();
  const auto ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out << a.value(), b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia) += g.leftCols(ca);
    if (t.requires_grad(ib)) t.grad_slot(ib) += g.rightCols(cb);
  });
}

Tensor gelu(const Tensor& x) { return elementwise(x, gelu_fn, gelu_grad); }
Tensor relu(const Tensor& x) { return elementwise(x, relu_fn, relu_grad); }
Tensor softplus(const Tensor& x) { return elementwise(x, softplus_fn, sigmoid_fn); }

Tensor sigmoid(const Tensor& x) {
  const auto ix = x.node_id();
  Matrix out = map(x.value(), sigmoid_fn);
  auto result = x.tape().record(out, {x}, [ix, out](Tape& t, const Matrix& g) {
    t.grad_slot(ix).array() += g.array() * out.array() * (1.0 - out.array());
  });
  return result;
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::GELU: return gelu(x);
    case Activation::ReLU: return relu(x);
    case Activation::Softplus: return softplus(x);
    case Activation::Identity: return x;
  }
  return x;
}

Tensor sum(const Tensor& x) {
  const auto ix = x.node_id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape().record(std::move(out), {x},
                         [ix](Tape& t, const Matrix& g) { t.grad_slot(ix).array() += g(0, 0); });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Tensor sum_rows(const Tensor& x) {
  const auto ix = x.node_id();
  Matrix out = x.value().colwise().sum();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Matrix& g) {
    t.grad_slot(ix).rowwise() += g.row(0);
  });
}

Tensor mean_rows(const Tensor& x) {
  return scale(sum_rows(x), 1.0 / static_cast<double>(x.rows()));
}

Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training, double eps) {
  const auto m = x.rows();
  const auto c = x.cols();
  if (m < 1) throw Error(ErrorCode::ShapeMismatch, "batch_norm on an empty batch");
  if (state.running_mean.size() != c) {
    state.running_mean = Eigen::RowVectorXd::Zero(c);
    state.running_var = Eigen::RowVectorXd::Ones(c);
  }
  const auto ix = x.node_id();
  if (!training) {
    const Eigen::RowVectorXd inv_std = (state.running_var.array() + eps).rsqrt().matrix();
    Matrix out = (x.value().rowwise() - state.running_mean).array().rowwise() * inv_std.array();
    return x.tape().record(std::move(out), {x}, [ix, inv_std](Tape& t, const Matrix& g) {
      t.grad_slot(ix).array() += g.array().rowwise() * inv_std.array();
    });
  }

  const Eigen::RowVectorXd mu = x.value().colwise().mean();
  const Matrix centered = x.value().rowwise() - mu;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean().matrix();
  const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = centered.array().rowwise() * inv_std.array();

  const double md = static_cast<double>(m);
  const Eigen::RowVectorXd unbiased = m > 1 ? Eigen::RowVectorXd(var * (md / (md - 1.0))) : var;
  state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * mu;
  state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * unbiased;

  return x.tape().record(xhat, {x}, [ix, xhat, inv_std, md](Tape& t, const Matrix& g) {
    const Eigen::RowVectorXd gsum = g.colwise().sum();
    const Eigen::RowVectorXd gxsum = g.cwiseProduct(xhat).colwise().sum();
    Matrix dx = (md * g).rowwise() - gsum;
    dx -= (xhat.array().rowwise() * gxsum.array()).matrix();
    dx = (dx.array().rowwise() * (inv_std.array() / md)).matrix();
    t.grad_slot(ix) += dx;
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  const auto c = x.cols();
  if (c < 1) throw Error(ErrorCode::ShapeMismatch, "layer_norm needs at least one column");
  const auto ix = x.node_id();
  const Eigen::VectorXd mu = x.value().rowwise().mean();
  const Matrix centered = x.value().colwise() - mu;
  const Eigen::VectorXd var = centered.array().square().rowwise().mean().matrix();
  const Eigen::VectorXd inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  const double cd = static_cast<double>(c);
  return x.tape().record(xhat, {x}, [ix, xhat, inv_std, cd](Tape& t, const Matrix& g) {
    const Eigen::VectorXd gsum = g.rowwise().sum();
    const Eigen::VectorXd gxsum = g.cwiseProduct(xhat).rowwise().sum();
    Matrix dx = (cd * g).colwise() - gsum;
    dx -= (xhat.array().colwise() * gxsum.array()).matrix();
    dx = (dx.array().colwise() * (inv_std.array() / cd)).matrix();
    t.grad_slot(ix) += dx;
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw Error(ErrorCode::InvalidArgument, "dropout probability must be < 1");
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < p ? 0.0 : 1.0 / (1.0 - p);
  const auto ix = x.node_id();
  return x.tape().record(x.value().cwiseProduct(mask), {x}, [ix, mask](Tape& t, const Matrix& g) {
    t.grad_slot(ix) += g.cwiseProduct(mask);
  });
}

Tensor segment_aggregate(const Tensor& x, const Tensor& coeff, const SegmentIndex& index,
                         const std::vector<double>& weight) {
  const auto n = index.num_groups();
  if (coeff.rows() != static_cast<Eigen::Index>(index.num_rows()) || coeff.cols() != x.cols())
    throw Error(ErrorCode::ShapeMismatch, "segment_aggregate: coefficient table shape");
  if (weight.size() != n) throw Error(ErrorCode::ShapeMismatch, "segment_aggregate: weights");
  for (const auto s : index.source)
    if (s >= static_cast<std::size_t>(x.rows()))
      throw Error(ErrorCode::ShapeMismatch, "segment_aggregate: source out of range");

  const auto& xv = x.value();
  const auto& cv = coeff.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t r = index.offsets[i]; r < index.offsets[i + 1]; ++r)
      out.row(ii) += xv.row(static_cast<Eigen::Index>(index.source[r]))
                         .cwiseProduct(cv.row(static_cast<Eigen::Index>(r)));
    out.row(ii) *= weight[i];
  }
  const auto ix = x.node_id(), ic = coeff.node_id();
  return x.tape().record(std::move(out), {x, coeff},
                         [ix, ic, index, weight](Tape& t, const Matrix& g) {
                           const bool gx = t.requires_grad(ix), gc = t.requires_grad(ic);
                           const auto& xv = t.value_of(ix);
                           const auto& cv = t.value_of(ic);
                           Matrix* dx = gx ? &t.grad_slot(ix) : nullptr;
                           Matrix* dc = gc ? &t.grad_slot(ic) : nullptr;
                           for (std::size_t i = 0; i < index.num_groups(); ++i) {
                             const Eigen::RowVectorXd gi =
                                 g.row(static_cast<Eigen::Index>(i)) * weight[i];
                             for (std::size_t r = index.offsets[i]; r < index.offsets[i + 1]; ++r) {
                               const auto rr = static_cast<Eigen::Index>(r);
                               const auto j = static_cast<Eigen::Index>(index.source[r]);
                               if (dx) dx->row(j) += gi.cwiseProduct(cv.row(rr));
                               if (dc) dc->row(rr) += gi.cwiseProduct(xv.row(j));
                             }
                           }
                         });
}

Tensor segment_softmax(const Tensor& c, const SegmentIndex& index) {
  if (c.rows() != static_cast<Eigen::Index>(index.num_rows()))
    throw Error(ErrorCode::ShapeMismatch, "segment_softmax: row count differs from index");
  Matrix out(c.rows(), c.cols());
  const auto& v = c.value();
  for (std::size_t i = 0; i < index.num_groups(); ++i) {
    const auto lo = static_cast<Eigen::Index>(index.offsets[i]);
    const auto len = static_cast<Eigen::Index>(index.group_size(i));
    if (len == 0)
      throw Error(ErrorCode::EmptyGroup, "softmax group " + std::to_string(i) + " is empty");
    const auto block = v.middleRows(lo, len);
    const Eigen::RowVectorXd mx = block.colwise().maxCoeff();
    Matrix e = (block.rowwise() - mx).array().exp();
    const Eigen::RowVectorXd z = e.colwise().sum();
    out.middleRows(lo, len) = e.array().rowwise() / z.array();
  }
  const auto ic = c.node_id();
  return c.tape().record(out, {c}, [ic, out, index](Tape& t, const Matrix& g) {
    auto& dc = t.grad_slot(ic);
    for (std::size_t i = 0; i < index.num_groups(); ++i) {
      const auto lo = static_cast<Eigen::Index>(index.offsets[i]);
      const auto len = static_cast<Eigen::Index>(index.group_size(i));
      const auto s = out.middleRows(lo, len);
      const auto gs = g.middleRows(lo, len);
      const Eigen::RowVectorXd dot = gs.cwiseProduct(s).colwise().sum();
      dc.middleRows(lo, len) += ((gs.rowwise() - dot).array() * s.array()).matrix();
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Vector& targets) {
  if (logits.value().size() != targets.size())
    throw Error(ErrorCode::LengthMismatch, "bce: " + std::to_string(logits.value().size()) +
                                               " logits vs " + std::to_string(targets.size()) +
                                               " targets");
  const auto n = targets.size();
  const auto& z = logits.value();
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) total += softplus_fn(z.data()[k]) - targets(k) * z.data()[k];
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(n);
  const auto iz = logits.node_id();
  return logits.tape().record(std::move(out), {logits}, [iz, targets](Tape& t, const Matrix& g) {
    auto& dz = t.grad_slot(iz);
    const auto& zv = t.value_of(iz);
    const double w = g(0, 0) / static_cast<double>(targets.size());
    for (Eigen::Index k = 0; k < targets.size(); ++k)
      dz.data()[k] += w * (sigmoid_fn(zv.data()[k]) - targets(k));
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Matrix& x,
                           double h) {
  GradCheckResult result;
  {
    Tape tape;
    const auto input = tape.variable(x);
    const auto loss = f(tape, input);
    tape.backward(loss);
    result.analytic =
        input.grad().size() == 0 ? Matrix::Zero(x.rows(), x.cols()) : Matrix(input.grad());
  }
  result.numeric = Matrix::Zero(x.rows(), x.cols());
  auto eval = [&](const Matrix& at) {
    Tape tape;
    return f(tape, tape.constant(at)).item();
  };
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Matrix plus = x, minus = x;
    plus.data()[k] += h;
    minus.data()[k] -= h;
    const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
    result.numeric.data()[k] = fd;
    const double err = std::abs(result.analytic.data()[k] - fd) / std::max(1.0, std::abs(fd));
    result.max_rel_error = std::max(result.max_rel_error, err);
  }
  return result;
}

double grad_check_parameters(ParameterStore& store, const std::function<Tensor(Tape&)>& loss,
                             double h) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  double worst = 0.0;
  for (auto& p : store) {
    const Matrix analytic = p->grad;
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + h;
      double up = 0.0, down = 0.0;
      {
        Tape tape;
        up = loss(tape).item();
      }
      p->value.data()[k] = saved - h;
      {
        Tape tape;
        down = loss(tape).item();
      }
      p->value.data()[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic.data()[k] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace ckg::ad
