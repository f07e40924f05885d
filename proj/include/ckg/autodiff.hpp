#pragma once

// Minimal reverse-mode differentiation over dense 2-D arrays.
//
// A Tape records every operation executed in a forward pass together with a
// closure that propagates the output gradient to its inputs. backward() walks
// the record in exact reverse order. Tensors are cheap handles into a Tape;
// they are only valid while their Tape lives. Scalars are 1x1 tensors.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ckg/graph.hpp"

namespace ckg {
class Rng;
}

namespace ckg::ad {

using Matrix = DenseMatrix;

/// Learnable array with a stable, unique name ("layer0.kernel.fc1.weight").
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class ParameterStore {
 public:
  /// Adds a zero-initialized parameter. Throws InvalidArgument on a duplicate name.
  Parameter& add(std::string name, Eigen::Index rows, Eigen::Index cols);
  Parameter& get(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

  /// {name: {"shape": [r, c], "data": [...]}} in insertion order.
  nlohmann::json to_json() const;
  /// Strict: every stored parameter must be present with a matching shape.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  /// Gradient after backward(); zero-sized if nothing flowed here.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const;
  bool requires_grad() const;
  std::size_t node_id() const { return id_; }
  Tape& tape() const { return *tape_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor variable(Matrix value);
  /// Leaf bound to a parameter; one node per parameter per tape.
  Tensor param(Parameter& p);

  /// Populates gradients of every reachable node and adds parameter
  /// gradients into Parameter::grad. Throws NonScalarLoss.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

  // Op construction interface.
  Tensor record(Matrix value, std::vector<Tensor> inputs, BackwardFn fn);
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator for an input; allocated zero on first use.
  Matrix& grad_slot(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Operations. All inputs must live on the same tape.

enum class Activation { Identity, GELU, ReLU, Softplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

Tensor matmul(const Tensor& a, const Tensor& b);
/// c * x with a constant left factor.
Tensor left_multiply(const Matrix& c, const Tensor& x);
/// x W^T + b along the last axis. x: [m, in], w: [out, in], b: [1, out] or [out, 1].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& w);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a + row broadcast over rows. row: [1, c].
Tensor add_row(const Tensor& a, const Tensor& row);
/// a * row broadcast over rows. row: [1, c].
Tensor mul_row(const Tensor& a, const Tensor& row);
/// Row r scaled by the constant col[r].
Tensor mul_col(const Tensor& a, const Vector& col);
Tensor concat_cols(const Tensor& a, const Tensor& b);

Tensor activation(const Tensor& x, Activation kind);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Column sums, [1, c].
Tensor sum_rows(const Tensor& x);
Tensor mean_rows(const Tensor& x);

struct BatchNormState {
  Eigen::RowVectorXd running_mean;
  Eigen::RowVectorXd running_var;
  double momentum = 0.1;
};

/// Per-channel standardization over rows, pre-affine. Uses batch statistics
/// (and updates the running ones) when training, running statistics otherwise.
Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training, double eps = 1e-5);
/// Per-row standardization over columns, pre-affine.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);
/// Inverted dropout; identity when p == 0 or not training.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

/// Rows of a pair table grouped by target node: rows offsets[i]..offsets[i+1]
/// belong to node i and row r pairs it with source[r].
struct SegmentIndex {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> source;

  std::size_t num_groups() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t num_rows() const { return source.size(); }
  std::size_t group_size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

/// out[i] = weight[i] * sum over rows r of group i of x[source[r]] * coeff[r].
/// x: [n, d], coeff: [m, d], weight: per-group constants.
Tensor segment_aggregate(const Tensor& x, const Tensor& coeff, const SegmentIndex& index,
                         const std::vector<double>& weight);
/// Softmax within each group, independently per column.
Tensor segment_softmax(const Tensor& c, const SegmentIndex& index);

/// Mean binary cross-entropy on logits, computed in the stable softplus form.
Tensor bce_with_logits(const Tensor& logits, const Vector& targets);

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckResult {
  double max_rel_error = 0.0;
  Matrix analytic;
  Matrix numeric;
};

/// Backward gradient vs central differences; error per coordinate is
/// |g_ad - g_fd| / max(1, |g_fd|). f must return a scalar.
GradCheckResult grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Matrix& x,
                           double h = 1e-6);

/// Same check over every scalar of every parameter in the store.
double grad_check_parameters(ParameterStore& store, const std::function<Tensor(Tape&)>& loss,
                             double h = 1e-6);

}  // namespace ckg::ad
