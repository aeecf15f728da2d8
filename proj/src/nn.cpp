#include "asr/nn.hpp"

#include <cmath>

#include "asr/errors.hpp"

namespace asr::nn {

ad::Parameter& ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ContractViolation("duplicate parameter: " + name);
  ad::Parameter p;
  p.name = name;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.m = Matrix::Zero(init.rows(), init.cols());
  p.v = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  index_[name] = params_.size() - 1;
  return params_.back();
}

ad::Parameter& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("unknown parameter: " + name);
  return params_[it->second];
}

const ad::Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("unknown parameter: " + name);
  return params_[it->second];
}

std::vector<ad::Parameter*> ParamStore::all() {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const ad::Parameter*> ParamStore::all() const {
  std::vector<const ad::Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p.frozen) continue;
    sq += static_cast<double>(p.grad.squaredNorm());
  }
  return std::sqrt(sq);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && std::isfinite(norm)) {
    const Real s = static_cast<Real>(max_norm / norm);
    for (auto& p : params_) p.grad *= s;
  }
  return norm;
}

bool ParamStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<Real>((2.0 * rng.uniform() - 1.0) * limit);
  }
  return m;
}

Linear Linear::create(ParamStore& store, const std::string& name, int in, int out, Rng& rng, double gain) {
  Linear l;
  l.w = &store.add(name + ".w", glorot(in, out, rng, gain));
  l.b = &store.add(name + ".b", Matrix::Zero(1, out));
  return l;
}

ad::Var Linear::operator()(ad::Tape& tape, const ad::Var& x) const {
  return ad::linear(x, tape.param(*w), tape.param(*b));
}

Mlp Mlp::create(ParamStore& store, const std::string& name, const std::vector<int>& widths, Rng& rng) {
  if (widths.size() < 2) throw ContractViolation("mlp needs at least input and output widths");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(Linear::create(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

ad::Var Mlp::operator()(ad::Tape& tape, const ad::Var& x) const {
  ad::Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](tape, h);
    if (i + 1 < layers.size()) h = ad::relu(h);
  }
  return h;
}

LstmCell LstmCell::create(ParamStore& store, const std::string& name, int in, int hidden, Rng& rng) {
  LstmCell cell;
  cell.hidden = hidden;
  cell.gates = Linear::create(store, name + ".gates", in + hidden, 4 * hidden, rng);
  // forget-gate bias 1
  cell.gates.b->value.middleCols(hidden, hidden).setOnes();
  return cell;
}

LstmState LstmCell::zero_state(ad::Tape& tape, Eigen::Index batch) const {
  return {tape.constant(Matrix::Zero(batch, hidden)), tape.constant(Matrix::Zero(batch, hidden))};
}

LstmState LstmCell::step(ad::Tape& tape, const ad::Var& x, const LstmState& state) const {
  ad::Var z = gates(tape, ad::concat_cols({x, state.h}));
  const Eigen::Index h = hidden;
  ad::Var i = ad::sigmoid(ad::slice_cols(z, 0, h));
  ad::Var f = ad::sigmoid(ad::slice_cols(z, h, h));
  ad::Var o = ad::sigmoid(ad::slice_cols(z, 2 * h, h));
  ad::Var g = ad::tanh(ad::slice_cols(z, 3 * h, h));
  ad::Var c = f * state.c + i * g;
  return {o * ad::tanh(c), c};
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const Real b1 = static_cast<Real>(cfg_.beta1);
  const Real b2 = static_cast<Real>(cfg_.beta2);
  const Real step = static_cast<Real>(cfg_.lr / bc1);
  const Real eps = static_cast<Real>(cfg_.eps);
  const Real inv_bc2 = static_cast<Real>(1.0 / bc2);
  for (ad::Parameter* p : store.all()) {
    if (p->frozen) continue;
    p->m = b1 * p->m + (1 - b1) * p->grad;
    p->v = b2 * p->v + (1 - b2) * p->grad.cwiseAbs2();
    p->value.array() -= step * p->m.array() / ((p->v.array() * inv_bc2).sqrt() + eps);
  }
}

}  // namespace asr::nn
