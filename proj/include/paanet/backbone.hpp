// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_BACKBONE_HPP
#define PAANET_BACKBONE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "paanet/layers.hpp"

namespace paanet {

/// Five levels f1..f5: level i has base_channels·2^(i−1) channels at
/// 1/2^(i−1) of the input resolution.
using FeaturePyramid = std::array<Tensor, 5>;

struct BackboneConfig {
  int base_channels = 8;
  int in_channels = 3;
  int block_depth = 1;
  std::uint64_t seed = 0;
};

/// Stage 1: general feature extractor.  Five conv-BN-PReLU blocks; blocks
/// 2..5 downsample by a stride-2 first conv, block 1 keeps full resolution
/// so downstream outputs land at 1, 1/2, 1/4, 1/8, 1/16 of the input.
class Backbone {
 public:
  Backbone() = default;
  explicit Backbone(const BackboneConfig& cfg);

  FeaturePyramid forward(const Tensor& x, bool training);

  /// Freezing drops requires_grad on every parameter and pins all batch
  /// norms to eval mode; no tape records, no stat updates, no byte moves.
  void set_frozen(bool f);
  bool frozen() const { return frozen_; }

  void visit(const std::string& prefix, StateVisitor& v);
  const BackboneConfig& config() const { return cfg_; }

  /// Channels of pyramid level i (1-based).
  int level_channels(int i) const { return cfg_.base_channels << (i - 1); }

 private:
  struct Unit {
    Conv2d conv;
    BatchNorm2d bn;
    PRelu act;
  };
  BackboneConfig cfg_;
  std::vector<std::vector<Unit>> blocks_;
  bool frozen_ = false;
};

Backbone build_backbone(const BackboneConfig& cfg);
FeaturePyramid gfe_forward(Backbone& backbone, const Tensor& x,
                           bool training = false);
void set_frozen(Backbone& backbone, bool frozen);

/// Optional warm-up on a synthetic four-way shape-silhouette task drawn
/// from the same image family as the saliency data.
/// Returns (loss at step 0, loss after the last step).  The intended use is
/// pretrain once, then set_frozen(true); the acceptance flows use seeded
/// random frozen backbones instead, for determinism without data.
std::pair<double, double> pretrain_backbone(Backbone& backbone, int steps,
                                            std::uint64_t seed = 0);

}  // namespace paanet

#endif  // PAANET_BACKBONE_HPP
