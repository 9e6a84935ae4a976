#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "m2sm/autodiff.hpp"
#include "m2sm/rng.hpp"

namespace m2sm {

using ad::Mat;
using ad::Param;
using ad::Tape;
using ad::Var;

/// Named parameter tensors, keyed "<section>/<name>" where section is one of
/// encoders, attention, fusion. Addresses are stable for the store's lifetime.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// Creates a tensor drawn uniformly from [-scale, scale].
  Param& create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
    if (params_.contains(name)) throw std::logic_error("duplicate parameter " + name);
    Mat v(rows, cols);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-scale, scale);
    auto [it, _] = params_.emplace(name, Param(name, std::move(v)));
    order_.push_back(name);
    return it->second;
  }

  Param& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter " + name);
    return it->second;
  }
  const Param& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.contains(name); }

  /// Creation order; stable across runs with the same configuration.
  const std::vector<std::string>& names() const { return order_; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.size());
    return n;
  }

 private:
  std::map<std::string, Param> params_;
  std::vector<std::string> order_;
};

/// One-layer LSTM cell. Gate rows are ordered input, forget, output, candidate.
struct LstmParams {
  Param* w = nullptr;  // 4h x (in + h)
  Param* b = nullptr;  // 4h x 1
  int hidden = 0;
  int input = 0;

  static LstmParams create(ParamStore& store, const std::string& prefix, int input, int hidden, Rng& rng,
                           double scale) {
    LstmParams p;
    p.hidden = hidden;
    p.input = input;
    p.w = &store.create(prefix + ".W", 4 * hidden, input + hidden, rng, scale);
    p.b = &store.create(prefix + ".b", 4 * hidden, 1, rng, scale);
    p.b->value.middleRows(hidden, hidden).setOnes();
    return p;
  }
};

struct BiLstmParams {
  LstmParams fwd;
  LstmParams bwd;

  static BiLstmParams create(ParamStore& store, const std::string& prefix, int input, int hidden, Rng& rng,
                             double scale) {
    return {LstmParams::create(store, prefix + ".fwd", input, hidden, rng, scale),
            LstmParams::create(store, prefix + ".bwd", input, hidden, rng, scale)};
  }
};

/// Scalar scorer: sigmoid(w2 . tanh(W1 x + b1) + b2).
struct FfnParams {
  Param* w1 = nullptr;
  Param* b1 = nullptr;
  Param* w2 = nullptr;
  Param* b2 = nullptr;

  static FfnParams create(ParamStore& store, const std::string& prefix, int input, int hidden, Rng& rng,
                          double scale) {
    return {&store.create(prefix + ".W1", hidden, input, rng, scale),
            &store.create(prefix + ".b1", hidden, 1, rng, scale),
            &store.create(prefix + ".W2", 1, hidden, rng, scale),
            &store.create(prefix + ".b2", 1, 1, rng, scale)};
  }

  Eigen::Index input_dim() const { return w1->value.cols(); }
};

inline Var ffn_logit(Tape& t, const FfnParams& p, const Var& x) {
  const Var hidden = ad::tanh(ad::affine(t.param(*p.w1), x, t.param(*p.b1)));
  return ad::affine(t.param(*p.w2), hidden, t.param(*p.b2));
}

inline Var ffn_prob(Tape& t, const FfnParams& p, const Var& x) { return ad::sigmoid(ffn_logit(t, p, x)); }

}  // namespace m2sm
