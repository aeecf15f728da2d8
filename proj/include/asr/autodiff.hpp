// Reverse-mode automatic differentiation over batched dense matrices.
//
// A Tape records every operation applied to its Vars. Each Var is a
// rows x cols matrix, where rows are batch elements by convention. Binary
// elementwise operations broadcast a 1 x n row, a B x 1 column, or a 1 x 1
// scalar against the other operand.
#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace asr {

#ifdef ASR_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace ad {

class Tape;

/// A trainable tensor with Adam moment buffers.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
  bool frozen = false;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Handle to a node on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Real scalar() const { return value()(0, 0); }
  bool needs_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(Real value);
  /// A free input whose gradient is kept after backward().
  Var input(Matrix value);
  /// Binds a parameter. backward() adds into param.grad.
  Var param(Parameter& param);

  /// Records an op. `backward` is only stored when some parent needs grad.
  Var record(Matrix value, std::span<const Var> parents, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }
  /// Id the next recorded node will receive.
  int next_id() const { return static_cast<int>(nodes_.size()); }

  /// Runs reverse accumulation from a 1 x 1 Var.
  void backward(const Var& root);

  /// Accumulates into the gradient of node `id` if it needs one.
  void accumulate(const Var& v, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(const Var& v, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(v.id())];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
};

// ---- elementwise binary (broadcasting) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
/// Elementwise max; ties route the gradient to `a`.
Var maximum(const Var& a, const Var& b);

Var add_scalar(const Var& a, Real s);
Var scale(const Var& a, Real s);
Var neg(const Var& a);

// ---- elementwise unary ----
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softplus(const Var& a);
/// log(sigmoid(a)), stable for large |a|.
Var log_sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
/// Clamps into [lo, hi]; the gradient is zero where clamped.
Var clamp(const Var& a, Real lo, Real hi);

// ---- linear algebra and reductions ----
Var matmul(const Var& a, const Var& b);
/// x * W + b with b a 1 x n row.
Var linear(const Var& x, const Var& w, const Var& b);
Var sum(const Var& a);
Var mean(const Var& a);
/// B x n -> B x 1
Var row_sum(const Var& a);
/// B x n -> 1 x n
Var col_mean(const Var& a);
/// Rowwise max over columns (B x n -> B x 1); ties route to the first column.
Var row_max(const Var& a);

// ---- shape ----
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var col(const Var& a, Eigen::Index j);
/// Value copy with no gradient path.
Var stop_gradient(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator+(const Var& a, Real s) { return add_scalar(a, s); }
inline Var operator+(Real s, const Var& a) { return add_scalar(a, s); }
inline Var operator-(const Var& a, Real s) { return add_scalar(a, -s); }
inline Var operator-(Real s, const Var& a) { return add_scalar(neg(a), s); }
inline Var operator*(const Var& a, Real s) { return scale(a, s); }
inline Var operator*(Real s, const Var& a) { return scale(a, s); }

/// Gaussian log-density summed over columns: B x d -> B x 1.
Var gaussian_log_density(const Var& x, const Var& mean, const Var& logvar);

}  // namespace ad
}  // namespace asr
