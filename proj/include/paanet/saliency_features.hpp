// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_SALIENCY_FEATURES_HPP
#define PAANET_SALIENCY_FEATURES_HPP

#include <array>
#include <vector>

#include "paanet/backbone.hpp"

namespace paanet {

/// One contrast operator: semi-learned X/Y gradient kernels (depthwise 3×3,
/// Sobel-initialized; kx's middle column and ky's middle row are mask-fixed
/// at zero, leaving 6 learnable entries per kernel channel), a square-sum
/// environment map E = Gx² + Gy², a channel-wise cosine comparison of input
/// against E, the dissimilarity mask m = (1 − cos)/2, and a closing 1×1 conv
/// normalizing the channel count.
class ContrastOperator {
 public:
  ContrastOperator() = default;
  ContrastOperator(int in_channels, int out_channels, Rng& rng);

  Tensor forward(const Tensor& x) const;

  /// The mask plane (N,1,H,W) for an input; forward() consumes it
  /// internally, tests probe it directly.
  Tensor saliency_mask(const Tensor& x) const;

  void set_frozen(bool f);
  void visit(const std::string& prefix, StateVisitor& v);

  int in_channels() const { return in_channels_; }
  Tensor& kx() { return kx_; }
  Tensor& ky() { return ky_; }
  Conv2d& channel_norm() { return norm_; }

 private:
  Tensor kx_;
  Tensor ky_;
  Conv2d norm_;
  int in_channels_ = 0;
  bool frozen_ = false;
};

struct SFEConfig {
  int order = 3;
  /// Canonical channels per scale; entries of 0 fall back to the incoming
  /// pyramid's channel counts.
  std::array<int, 5> channels{0, 0, 0, 0, 0};
};

/// Neighbor assembly of Eq-style cross-scale context: scale i concatenates
/// (down(f_{i-1}), f_i, up(f_{i+1})), dropping the missing neighbor at the
/// ends.  Resampling is bilinear to scale i's resolution.
Tensor cross_scale_assemble(const FeaturePyramid& p, int i);

/// Stage 3: n cascaded orders of per-scale contrast operators, each order
/// re-assembling across scales first.  Per-scale output channels stay at the
/// configured canonical count for every order.
class SaliencyFeatureExtractor {
 public:
  SaliencyFeatureExtractor() = default;
  SaliencyFeatureExtractor(const SFEConfig& cfg,
                           const std::array<int, 5>& in_channels, Rng& rng);

  FeaturePyramid forward(const FeaturePyramid& f_pre) const;

  void set_frozen(bool f);
  void visit(const std::string& prefix, StateVisitor& v);

  const SFEConfig& config() const { return cfg_; }
  ContrastOperator& op(int order, int scale) {
    return operators_[order - 1][scale - 1];
  }

 private:
  SFEConfig cfg_;
  std::vector<std::array<ContrastOperator, 5>> operators_;
};

Tensor contrast_operator_forward(const ContrastOperator& op, const Tensor& x);
FeaturePyramid sfe_stage_forward(const SaliencyFeatureExtractor& sfe,
                                 const FeaturePyramid& f_pre);

}  // namespace paanet

#endif  // PAANET_SALIENCY_FEATURES_HPP
