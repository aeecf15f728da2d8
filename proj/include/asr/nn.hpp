// Parameter storage, dense layers, LSTM cell, and the Adam optimizer.
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "asr/autodiff.hpp"
#include "asr/random.hpp"

namespace asr::nn {

/// Named parameters in insertion order. Parameter addresses are stable.
class ParamStore {
 public:
  ad::Parameter& add(const std::string& name, Matrix init);
  ad::Parameter& get(const std::string& name);
  const ad::Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  double grad_norm() const;
  /// Rescales all gradients so their global L2 norm is at most max_norm.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm);
  bool all_finite() const;
  std::size_t num_scalars() const;

 private:
  std::deque<ad::Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// Glorot-uniform initialized matrix.
Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng, double gain = 1.0);

struct Linear {
  ad::Parameter* w = nullptr;
  ad::Parameter* b = nullptr;

  static Linear create(ParamStore& store, const std::string& name, int in, int out, Rng& rng, double gain = 1.0);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const;
  int in() const { return static_cast<int>(w->value.rows()); }
  int out() const { return static_cast<int>(w->value.cols()); }
};

/// Linear layers with ReLU between them; the last layer is linear.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp create(ParamStore& store, const std::string& name, const std::vector<int>& widths, Rng& rng);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const;
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

struct LstmCell {
  Linear gates;
  int hidden = 0;

  static LstmCell create(ParamStore& store, const std::string& name, int in, int hidden, Rng& rng);
  LstmState zero_state(ad::Tape& tape, Eigen::Index batch) const;
  LstmState step(ad::Tape& tape, const ad::Var& x, const LstmState& state) const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  /// Ascent-agnostic: moves parameters against their stored gradients.
  void step(ParamStore& store);
  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace asr::nn
