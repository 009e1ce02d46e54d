// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_TENSOR_HPP
#define PAANET_TENSOR_HPP

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "paanet/types.hpp"

namespace paanet {

template <typename S>
using ArrayXT = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using MatXT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Storage node shared by tensor handles.  `grad` stays empty until a
/// backward pass allocates it.  `learn_mask`, when set, multiplies the
/// accumulated gradient entrywise at the end of backward, so mask-0 entries
/// never see a nonzero gradient (semi-learned kernel contract).
template <typename S>
struct NodeT {
  Shape shape;
  ArrayXT<S> data;
  ArrayXT<S> grad;
  bool requires_grad = false;
  std::shared_ptr<ArrayXT<S>> learn_mask;
};

template <typename S>
class GraphT;

/// Value-semantics handle over a shared node (NCHW, flat row-major data).
template <typename S>
class TensorT {
 public:
  using Node = NodeT<S>;

  TensorT() = default;
  explicit TensorT(const Shape& shape) : node_(std::make_shared<Node>()) {
    node_->shape = shape;
    node_->data.setZero(shape.numel());
  }
  explicit TensorT(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static TensorT zeros(const Shape& shape) { return TensorT(shape); }

  static TensorT full(const Shape& shape, S value) {
    TensorT t(shape);
    t.node_->data.setConstant(shape.numel(), value);
    return t;
  }

  static TensorT from(const Shape& shape, const std::vector<S>& values) {
    require(static_cast<std::int64_t>(values.size()) == shape.numel(),
            "tensor init: value count does not match shape " + shape.str());
    TensorT t(shape);
    for (std::size_t i = 0; i < values.size(); ++i)
      t.node_->data(static_cast<Eigen::Index>(i)) = values[i];
    return t;
  }

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->shape.numel(); }

  ArrayXT<S>& data() { return node_->data; }
  const ArrayXT<S>& data() const { return node_->data; }
  ArrayXT<S>& grad() { return node_->grad; }
  const ArrayXT<S>& grad() const { return node_->grad; }

  S& at(int n, int c, int h, int w) { return node_->data(index(n, c, h, w)); }
  S at(int n, int c, int h, int w) const {
    return node_->data(index(n, c, h, w));
  }
  S& operator[](std::int64_t i) { return node_->data(i); }
  S operator[](std::int64_t i) const { return node_->data(i); }

  /// Flat offset of (n,c,h,w); bounds are the caller's problem (hot path).
  Eigen::Index index(int n, int c, int h, int w) const {
    const Shape& s = node_->shape;
    return ((static_cast<Eigen::Index>(n) * s.c + c) * s.h + h) * s.w + w;
  }

  S scalar() const {
    require(numel() == 1, "scalar() on tensor of shape " + shape().str());
    return node_->data(0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  void set_learn_mask(const TensorT& mask) {
    require(mask.shape() == shape(), "learn_mask shape mismatch");
    node_->learn_mask = std::make_shared<ArrayXT<S>>(mask.data());
  }
  void clear_learn_mask() { node_->learn_mask.reset(); }
  const std::shared_ptr<ArrayXT<S>>& learn_mask() const {
    return node_->learn_mask;
  }

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Deep copy of data (no tape linkage, no grad).
  TensorT clone() const {
    TensorT t(shape());
    t.data() = data();
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Define-by-run tape.  Ops record steps onto the innermost active graph;
/// backward replays them in exact reverse execution order.  One graph is
/// driven by one thread at a time (the stack below is thread-local).
template <typename S>
class GraphT {
 public:
  using NodePtr = std::shared_ptr<NodeT<S>>;

  struct Step {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> vjp;
  };

  /// RAII activation: ops executed while alive record onto this graph.
  class Scope {
   public:
    explicit Scope(GraphT& g) { stack().push_back(&g); }
    ~Scope() { stack().pop_back(); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
  };

  static GraphT* active() {
    auto& s = stack();
    return s.empty() ? nullptr : s.back();
  }

  static void push_null() { stack().push_back(nullptr); }
  static void pop_scope() { stack().pop_back(); }

  void record(Step step) { steps_.push_back(std::move(step)); }
  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

  /// Populates grads of every requires_grad node reachable on the tape.
  /// Grads are zeroed first, so repeated calls do not accumulate, and
  /// learn_masks are applied afterwards.
  void backward(const TensorT<S>& loss) {
    require(loss.numel() == 1,
            "backward: loss must be scalar, got " + loss.shape().str());
    std::unordered_set<NodeT<S>*> seen;
    std::vector<NodePtr> nodes;
    auto touch = [&](const NodePtr& p) {
      if (p && seen.insert(p.get()).second) nodes.push_back(p);
    };
    for (const auto& st : steps_) {
      for (const auto& in : st.inputs) touch(in);
      touch(st.output);
    }
    touch(loss.node());
    for (const auto& p : nodes) p->grad.setZero(p->data.size());
    loss.node()->grad(0) = S(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->vjp();
    for (const auto& p : nodes)
      if (p->requires_grad && p->learn_mask) p->grad *= *p->learn_mask;
  }

 private:
  static std::vector<GraphT*>& stack() {
    static thread_local std::vector<GraphT*> s;
    return s;
  }

  std::vector<Step> steps_;
};

/// Suspends recording (pushes a null graph).  Used for frozen-backbone
/// forwards, finite-difference probes and inference.
template <typename S>
class NoGradScopeT {
 public:
  NoGradScopeT() { GraphT<S>::push_null(); }
  ~NoGradScopeT() { GraphT<S>::pop_scope(); }
  NoGradScopeT(const NoGradScopeT&) = delete;
  NoGradScopeT& operator=(const NoGradScopeT&) = delete;
};

}  // namespace paanet

#endif  // PAANET_TENSOR_HPP
