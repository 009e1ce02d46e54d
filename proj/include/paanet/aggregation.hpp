// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_AGGREGATION_HPP
#define PAANET_AGGREGATION_HPP

#include <array>

#include "paanet/backbone.hpp"

namespace paanet {

/// Five side saliency maps plus the fused map, all (N,1,H,W) probabilities
/// at input resolution.
struct ModelOutputs {
  std::array<Tensor, 5> side;
  Tensor fused;
};

/// Stage 4: per-scale heads (3×3 conv to one channel + BN + PReLU), bilinear
/// upsampling back to input resolution, a 1×1 fusion conv over the five
/// concatenated side logits, and sigmoids on all six outputs.
class FeatureAggregation {
 public:
  FeatureAggregation() = default;
  FeatureAggregation(const std::array<int, 5>& in_channels, Rng& rng);

  /// Head for scale i (1-based); returns pre-sigmoid logits upsampled by j.
  Tensor branch_forward(int i, const Tensor& f_i, int up_factor, bool training);

  ModelOutputs forward(const FeaturePyramid& f_saliency, bool training);

  void set_frozen(bool f);
  void visit(const std::string& prefix, StateVisitor& v);

  Conv2d& fuse_conv() { return fuse_; }

 private:
  struct Head {
    Conv2d conv;
    BatchNorm2d bn;
    PRelu act;
  };
  std::array<Head, 5> heads_;
  Conv2d fuse_;
};

Tensor fa_branch_forward(FeatureAggregation& fa, int i, const Tensor& f_i,
                         int up_factor, bool training = false);
ModelOutputs fa_fuse_forward(FeatureAggregation& fa,
                             const FeaturePyramid& f_saliency,
                             bool training = false);

}  // namespace paanet

#endif  // PAANET_AGGREGATION_HPP
