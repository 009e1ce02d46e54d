// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_OPTIMIZER_HPP
#define PAANET_OPTIMIZER_HPP

#include <unordered_map>
#include <vector>

#include "paanet/layers.hpp"

namespace paanet {

/// Training hyperparameters.  lr decays once, by `gamma`, from epoch
/// `lr_step` (1-based) onwards.
struct OptimizerConfig {
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double gamma = 0.1;
  int epochs = 10;
  int lr_step = 8;
};

/// SGD with momentum and L2 weight decay:
///   v ← momentum·v + (g + weight_decay·w),  w ← w − lr·v
/// Frozen tensors (requires_grad == false) are skipped outright, so their
/// bytes and velocity never move.  learn_mask zeroes the velocity of fixed
/// entries as well, keeping them bit-identical across any number of steps
/// (weight decay would otherwise leak into them).
class Sgd {
 public:
  Sgd() = default;
  Sgd(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  void step(std::vector<std::pair<std::string, Tensor>>& params);

  /// Velocity buffer for one parameter, empty until its first step.
  /// Exposed for checkpointing.
  ArrayXT<Scalar>* velocity(const Tensor& param);
  const ArrayXT<Scalar>* velocity(const Tensor& param) const;
  const std::unordered_map<const NodeT<Scalar>*, ArrayXT<Scalar>>& velocities()
      const {
    return velocity_;
  }
  void set_velocity(const Tensor& param, const ArrayXT<Scalar>& v);

 private:
  double lr_ = 1e-4;
  double momentum_ = 0.9;
  double weight_decay_ = 5e-4;
  std::unordered_map<const NodeT<Scalar>*, ArrayXT<Scalar>> velocity_;
};

}  // namespace paanet

#endif  // PAANET_OPTIMIZER_HPP
