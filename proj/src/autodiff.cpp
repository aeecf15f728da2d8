#include "asr/autodiff.hpp"

#include <cmath>
#include <sstream>

#include "asr/errors.hpp"

namespace asr::ad {

using Index = Eigen::Index;

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Real value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::input(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(Parameter& param) {
  nodes_.push_back(Node{param.value, Matrix(), !param.frozen, nullptr, &param});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractViolation("autodiff: operand from a different tape");
    needs = needs || p.needs_grad();
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(const Var& v, const Matrix& g) { accumulate_expr(v, g); }

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw ContractViolation("autodiff: backward on a foreign Var");
  if (root.rows() != 1 || root.cols() != 1) throw ContractViolation("autodiff: backward needs a 1x1 root");
  if (!root.needs_grad()) return;
  accumulate(root, Matrix::Ones(1, 1));
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->grad = n.grad;
      } else {
        n.param->grad += n.grad;
      }
    }
  }
}

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

std::pair<Index, Index> broadcast_shape(const Matrix& a, const Matrix& b) {
  auto dim = [&](Index x, Index y) -> Index {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ContractViolation("autodiff: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
  };
  return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

Matrix expand(const Matrix& m, Index r, Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  return m.replicate(r / m.rows(), c / m.cols());
}

Matrix reduce_to(const Matrix& g, Index r, Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  if (r == 1 && c == 1) return Matrix::Constant(1, 1, g.sum());
  if (r == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

template <typename F, typename DF>
Var unary(const Var& a, F forward, DF dfdx) {
  Matrix out = forward(a.value().array()).matrix();
  Tape* t = a.tape();
  const int out_id = t->next_id();
  return t->record(std::move(out), {a}, [t, a, out_id, dfdx](const Matrix& g) {
    t->accumulate_expr(a, (g.array() * dfdx(t->value(a.id()).array(), t->value(out_id).array())).matrix());
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  auto [r, c] = broadcast_shape(a.value(), b.value());
  Matrix out = expand(a.value(), r, c) + expand(b.value(), r, c);
  return a.tape()->record(std::move(out), {a, b}, [a, b](const Matrix& g) {
    Tape* t = a.tape();
    if (a.needs_grad()) t->accumulate(a, reduce_to(g, a.rows(), a.cols()));
    if (b.needs_grad()) t->accumulate(b, reduce_to(g, b.rows(), b.cols()));
  });
}

Var sub(const Var& a, const Var& b) {
  auto [r, c] = broadcast_shape(a.value(), b.value());
  Matrix out = expand(a.value(), r, c) - expand(b.value(), r, c);
  return a.tape()->record(std::move(out), {a, b}, [a, b](const Matrix& g) {
    Tape* t = a.tape();
    if (a.needs_grad()) t->accumulate(a, reduce_to(g, a.rows(), a.cols()));
    if (b.needs_grad()) t->accumulate(b, reduce_to(Matrix(-g), b.rows(), b.cols()));
  });
}

Var mul(const Var& a, const Var& b) {
  auto [r, c] = broadcast_shape(a.value(), b.value());
  Matrix out = (expand(a.value(), r, c).array() * expand(b.value(), r, c).array()).matrix();
  return a.tape()->record(std::move(out), {a, b}, [a, b, r, c](const Matrix& g) {
    Tape* t = a.tape();
    if (a.needs_grad()) {
      Matrix ga = (g.array() * expand(b.value(), r, c).array()).matrix();
      t->accumulate(a, reduce_to(ga, a.rows(), a.cols()));
    }
    if (b.needs_grad()) {
      Matrix gb = (g.array() * expand(a.value(), r, c).array()).matrix();
      t->accumulate(b, reduce_to(gb, b.rows(), b.cols()));
    }
  });
}

Var div(const Var& a, const Var& b) {
  auto [r, c] = broadcast_shape(a.value(), b.value());
  Matrix out = (expand(a.value(), r, c).array() / expand(b.value(), r, c).array()).matrix();
  return a.tape()->record(std::move(out), {a, b}, [a, b, r, c](const Matrix& g) {
    Tape* t = a.tape();
    Matrix bv = expand(b.value(), r, c);
    if (a.needs_grad()) {
      Matrix ga = (g.array() / bv.array()).matrix();
      t->accumulate(a, reduce_to(ga, a.rows(), a.cols()));
    }
    if (b.needs_grad()) {
      Matrix av = expand(a.value(), r, c);
      Matrix gb = (-g.array() * av.array() / bv.array().square()).matrix();
      t->accumulate(b, reduce_to(gb, b.rows(), b.cols()));
    }
  });
}

Var maximum(const Var& a, const Var& b) {
  auto [r, c] = broadcast_shape(a.value(), b.value());
  Matrix av = expand(a.value(), r, c);
  Matrix bv = expand(b.value(), r, c);
  Matrix out = av.cwiseMax(bv);
  return a.tape()->record(std::move(out), {a, b}, [a, b, av, bv](const Matrix& g) {
    Tape* t = a.tape();
    auto pick_a = (av.array() >= bv.array()).cast<Real>();
    if (a.needs_grad()) {
      Matrix ga = (g.array() * pick_a).matrix();
      t->accumulate(a, reduce_to(ga, a.rows(), a.cols()));
    }
    if (b.needs_grad()) {
      Matrix gb = (g.array() * (1 - pick_a)).matrix();
      t->accumulate(b, reduce_to(gb, b.rows(), b.cols()));
    }
  });
}

Var add_scalar(const Var& a, Real s) {
  Matrix out = (a.value().array() + s).matrix();
  return a.tape()->record(std::move(out), {a}, [a](const Matrix& g) { a.tape()->accumulate(a, g); });
}

Var scale(const Var& a, Real s) {
  Matrix out = a.value() * s;
  return a.tape()->record(std::move(out), {a}, [a, s](const Matrix& g) { a.tape()->accumulate_expr(a, g * s); });
}

Var neg(const Var& a) { return scale(a, Real(-1)); }

Var sigmoid(const Var& a) {
  return unary(
      a, [](const auto& x) { return 1 / (1 + (-x).exp()); },
      [](const auto&, const auto& y) { return y * (1 - y); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.tanh(); }, [](const auto&, const auto& y) { return 1 - y.square(); });
}

Var softplus(const Var& a) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return unary(
      a, [](const auto& x) { return x.max(Real(0)) + (-x.abs()).exp().log1p(); },
      [](const auto& x, const auto&) { return 1 / (1 + (-x).exp()); });
}

Var log_sigmoid(const Var& a) {
  return unary(
      a, [](const auto& x) { return -((-x).max(Real(0)) + (-x.abs()).exp().log1p()); },
      [](const auto& x, const auto&) { return 1 / (1 + x.exp()); });
}

Var exp(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.exp(); }, [](const auto&, const auto& y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.log(); }, [](const auto& x, const auto&) { return 1 / x; });
}

Var relu(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.max(Real(0)); },
      [](const auto& x, const auto&) { return (x > Real(0)).template cast<Real>(); });
}

Var abs(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.abs(); },
      [](const auto& x, const auto&) {
        return (x > Real(0)).template cast<Real>() - (x < Real(0)).template cast<Real>();
      });
}

Var square(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.square(); }, [](const auto& x, const auto&) { return 2 * x; });
}

Var clamp(const Var& a, Real lo, Real hi) {
  return unary(
      a, [lo, hi](const auto& x) { return x.max(lo).min(hi); },
      [lo, hi](const auto& x, const auto&) { return ((x >= lo) && (x <= hi)).template cast<Real>(); });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("autodiff: matmul shapes " + shape_str(a.value()) + " and " + shape_str(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](const Matrix& g) {
    Tape* t = a.tape();
    if (a.needs_grad()) t->accumulate_expr(a, g * b.value().transpose());
    if (b.needs_grad()) t->accumulate_expr(b, a.value().transpose() * g);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ContractViolation("autodiff: linear shapes x=" + shape_str(x.value()) + " w=" + shape_str(w.value()) +
                            " b=" + shape_str(b.value()));
  }
  Matrix out(x.rows(), w.cols());
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape()->record(std::move(out), {x, w, b}, [x, w, b](const Matrix& g) {
    Tape* t = x.tape();
    if (x.needs_grad()) t->accumulate_expr(x, g * w.value().transpose());
    if (w.needs_grad()) t->accumulate_expr(w, x.value().transpose() * g);
    if (b.needs_grad()) t->accumulate_expr(b, g.colwise().sum());
  });
}

Var sum(const Var& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return a.tape()->record(std::move(out), {a}, [a](const Matrix& g) {
    a.tape()->accumulate_expr(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  const Real n = static_cast<Real>(a.value().size());
  return scale(sum(a), 1 / n);
}

Var row_sum(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape()->record(std::move(out), {a}, [a](const Matrix& g) {
    a.tape()->accumulate_expr(a, g.replicate(1, a.cols()));
  });
}

Var col_mean(const Var& a) {
  const Real n = static_cast<Real>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return a.tape()->record(std::move(out), {a}, [a, n](const Matrix& g) {
    a.tape()->accumulate_expr(a, g.replicate(a.rows(), 1) / n);
  });
}

Var row_max(const Var& a) {
  std::vector<Index> arg(static_cast<std::size_t>(a.rows()));
  Matrix out(a.rows(), 1);
  for (Index r = 0; r < a.rows(); ++r) {
    Index j = 0;
    out(r, 0) = a.value().row(r).maxCoeff(&j);
    arg[static_cast<std::size_t>(r)] = j;
  }
  return a.tape()->record(std::move(out), {a}, [a, arg](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (Index r = 0; r < a.rows(); ++r) ga(r, arg[static_cast<std::size_t>(r)]) = g(r, 0);
    a.tape()->accumulate(a, ga);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("autodiff: concat of nothing");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ContractViolation("autodiff: concat row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), parts, [saved](const Matrix& g) {
    Index off = 0;
    for (const Var& p : saved) {
      if (p.needs_grad()) p.tape()->accumulate_expr(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ContractViolation("autodiff: slice out of range");
  Matrix out = a.value().middleCols(start, count);
  return a.tape()->record(std::move(out), {a}, [a, start, count](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleCols(start, count) = g;
    a.tape()->accumulate(a, ga);
  });
}

Var col(const Var& a, Index j) { return slice_cols(a, j, 1); }

Var stop_gradient(const Var& a) { return a.tape()->constant(a.value()); }

Var gaussian_log_density(const Var& x, const Var& mean, const Var& logvar) {
  static const Real kLog2Pi = static_cast<Real>(std::log(2.0 * 3.14159265358979323846));
  Var z2 = square(x - mean) / exp(logvar);
  return scale(row_sum(z2 + logvar + kLog2Pi), Real(-0.5));
}

}  // namespace ad
