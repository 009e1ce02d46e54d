// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_LAYERS_HPP
#define PAANET_LAYERS_HPP

#include <cmath>
#include <functional>
#include <string>

#include "paanet/ops.hpp"
#include "paanet/rng.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

/// Walks the named state of a module tree.  `param` sees learnable tensors
/// (with learn_mask and requires_grad on the tensor itself), `buffer` sees
/// persistent non-learned arrays (batch-norm running stats), `flag` sees
/// booleans; loaders apply a flag through `on_load` so dependent state
/// (requires_grad, pinned eval mode) stays in sync.
template <typename S>
class StateVisitorT {
 public:
  virtual ~StateVisitorT() = default;
  virtual void param(const std::string& name, TensorT<S>& t) = 0;
  virtual void buffer(const std::string& name, ArrayXT<S>& a) = 0;
  virtual void flag(const std::string& name, bool value,
                    const std::function<void(bool)>& on_load) = 0;
};

/// He-normal fill, fan-in from the receptive field.
template <typename S>
void he_init(TensorT<S>& w, std::int64_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<S>(rng.normal(0.0, stddev));
}

template <typename S>
class Conv2dT {
 public:
  Conv2dT() = default;
  Conv2dT(int cin, int cout, int k, int stride, int padding, bool with_bias,
          Rng& rng)
      : weight_(Shape(cout, cin, k, k)), stride_(stride), padding_(padding) {
    he_init(weight_, static_cast<std::int64_t>(cin) * k * k, rng);
    weight_.set_requires_grad(true);
    if (with_bias) {
      bias_ = TensorT<S>(Shape(1, cout, 1, 1));
      bias_.set_requires_grad(true);
    }
  }

  TensorT<S> forward(const TensorT<S>& x) const {
    return conv2d(x, weight_, bias_, stride_, padding_);
  }

  void set_frozen(bool f) {
    frozen_ = f;
    weight_.set_requires_grad(!f);
    if (bias_.valid()) bias_.set_requires_grad(!f);
  }
  bool frozen() const { return frozen_; }

  void visit(const std::string& prefix, StateVisitorT<S>& v) {
    v.param(prefix + ".weight", weight_);
    if (bias_.valid()) v.param(prefix + ".bias", bias_);
    v.flag(prefix + ".frozen", frozen_, [this](bool f) { set_frozen(f); });
  }

  TensorT<S>& weight() { return weight_; }
  TensorT<S>& bias() { return bias_; }

 private:
  TensorT<S> weight_;
  TensorT<S> bias_;
  int stride_ = 1;
  int padding_ = 0;
  bool frozen_ = false;
};

template <typename S>
class ConvTranspose2dT {
 public:
  ConvTranspose2dT() = default;
  ConvTranspose2dT(int cin, int cout, int k, int stride, int padding, Rng& rng)
      : weight_(Shape(cin, cout, k, k)), stride_(stride), padding_(padding) {
    he_init(weight_, static_cast<std::int64_t>(cin) * k * k, rng);
    weight_.set_requires_grad(true);
  }

  TensorT<S> forward(const TensorT<S>& x) const {
    return conv_transpose2d(x, weight_, stride_, padding_);
  }

  void set_frozen(bool f) {
    frozen_ = f;
    weight_.set_requires_grad(!f);
  }
  bool frozen() const { return frozen_; }

  void visit(const std::string& prefix, StateVisitorT<S>& v) {
    v.param(prefix + ".weight", weight_);
    v.flag(prefix + ".frozen", frozen_, [this](bool f) { set_frozen(f); });
  }

  TensorT<S>& weight() { return weight_; }

 private:
  TensorT<S> weight_;
  int stride_ = 2;
  int padding_ = 1;
  bool frozen_ = false;
};

template <typename S>
class BatchNorm2dT {
 public:
  BatchNorm2dT() = default;
  explicit BatchNorm2dT(int channels)
      : gamma_(TensorT<S>::full(Shape(1, channels, 1, 1), S(1))),
        beta_(Shape(1, channels, 1, 1)) {
    gamma_.set_requires_grad(true);
    beta_.set_requires_grad(true);
    state_.running_mean.setZero(channels);
    state_.running_var.setOnes(channels);
  }

  /// `training` is the caller's mode; a frozen layer always runs eval.
  TensorT<S> forward(const TensorT<S>& x, bool training) {
    const BnMode mode =
        (training && !frozen_) ? BnMode::kTrain : BnMode::kEval;
    return batch_norm2d(x, gamma_, beta_, state_, mode);
  }

  /// Freezing pins eval mode.  A never-trained layer gets its default
  /// stats (mean 0, var 1) declared usable, so a frozen random backbone
  /// can run without a prior training pass.
  void set_frozen(bool f) {
    frozen_ = f;
    gamma_.set_requires_grad(!f);
    beta_.set_requires_grad(!f);
    if (f) state_.has_stats = true;
  }
  bool frozen() const { return frozen_; }

  void visit(const std::string& prefix, StateVisitorT<S>& v) {
    v.param(prefix + ".gamma", gamma_);
    v.param(prefix + ".beta", beta_);
    v.buffer(prefix + ".running_mean", state_.running_mean);
    v.buffer(prefix + ".running_var", state_.running_var);
    v.flag(prefix + ".has_stats", state_.has_stats,
           [this](bool b) { state_.has_stats = b; });
    v.flag(prefix + ".frozen", frozen_, [this](bool f) { set_frozen(f); });
  }

  BnState<S>& state() { return state_; }
  TensorT<S>& gamma() { return gamma_; }
  TensorT<S>& beta() { return beta_; }

 private:
  TensorT<S> gamma_;
  TensorT<S> beta_;
  BnState<S> state_;
  bool frozen_ = false;
};

template <typename S>
class PReluT {
 public:
  PReluT() = default;
  explicit PReluT(int channels, S init = S(0.25))
      : slope_(TensorT<S>::full(Shape(1, channels, 1, 1), init)) {
    slope_.set_requires_grad(true);
  }

  TensorT<S> forward(const TensorT<S>& x) const { return prelu(x, slope_); }

  void set_frozen(bool f) {
    frozen_ = f;
    slope_.set_requires_grad(!f);
  }
  bool frozen() const { return frozen_; }

  void visit(const std::string& prefix, StateVisitorT<S>& v) {
    v.param(prefix + ".slope", slope_);
    v.flag(prefix + ".frozen", frozen_, [this](bool f) { set_frozen(f); });
  }

  TensorT<S>& slope() { return slope_; }

 private:
  TensorT<S> slope_;
  bool frozen_ = false;
};

/// Collects (name, tensor) pairs from a visit() walk; the common way to
/// hand a module's parameters to the optimizer or count them in tests.
template <typename S>
struct ParamCollectorT : StateVisitorT<S> {
  std::vector<std::pair<std::string, TensorT<S>>> params;
  void param(const std::string& name, TensorT<S>& t) override {
    params.emplace_back(name, t);
  }
  void buffer(const std::string&, ArrayXT<S>&) override {}
  void flag(const std::string&, bool, const std::function<void(bool)>&) override {}
};

// The pipeline runs in double end to end; tests lean on FD oracles.
using Scalar = double;
using Tensor = TensorT<Scalar>;
using Graph = GraphT<Scalar>;
using NoGradScope = NoGradScopeT<Scalar>;
using StateVisitor = StateVisitorT<Scalar>;
using Conv2d = Conv2dT<Scalar>;
using ConvTranspose2d = ConvTranspose2dT<Scalar>;
using BatchNorm2d = BatchNorm2dT<Scalar>;
using PRelu = PReluT<Scalar>;
using ParamCollector = ParamCollectorT<Scalar>;

}  // namespace paanet

#endif  // PAANET_LAYERS_HPP
