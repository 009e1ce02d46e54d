// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_FEATURE_PREPROCESS_HPP
#define PAANET_FEATURE_PREPROCESS_HPP

#include <array>

#include "paanet/backbone.hpp"

namespace paanet {

/// Stage 2: top-down refinement.  Block i upsamples the level-(i+1) result
/// (transposed conv, ×2) and maps it to level-i channels through two convs,
/// PReLU and batch norm; the block-5 entry point skips the upsample.  The
/// stage chains on preprocessed features:
///   f5_pre = M5(f5_gen),   f_i_pre = M_i(f_{i+1}_pre) + f_i_gen  (i = 4..1)
class FeaturePreprocess {
 public:
  FeaturePreprocess() = default;
  FeaturePreprocess(const std::array<int, 5>& level_channels, Rng& rng);

  /// One block, 1-based index.  i ≤ 4 doubles the spatial size and maps to
  /// level-i channels; i = 5 preserves both.
  Tensor block_forward(int i, const Tensor& input, bool training);

  FeaturePyramid forward(const FeaturePyramid& f_gen, bool training);

  void set_frozen(bool f);
  void visit(const std::string& prefix, StateVisitor& v);

 private:
  struct Block {
    bool has_up = false;
    ConvTranspose2d up;
    Conv2d conv_a;
    Conv2d conv_b;
    PRelu act;
    BatchNorm2d bn;
  };
  std::array<Block, 5> blocks_;
  std::array<int, 5> in_channels_{};
};

Tensor fp_block_forward(FeaturePreprocess& fp, int i, const Tensor& input,
                        bool training = false);
FeaturePyramid fp_stage_forward(FeaturePreprocess& fp,
                                const FeaturePyramid& f_gen,
                                bool training = false);

}  // namespace paanet

#endif  // PAANET_FEATURE_PREPROCESS_HPP
