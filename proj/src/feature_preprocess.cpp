// SPDX-License-Identifier: Apache-2.0

#include "paanet/feature_preprocess.hpp"

#include <string>

namespace paanet {

FeaturePreprocess::FeaturePreprocess(const std::array<int, 5>& ch, Rng& rng) {
  for (int i = 1; i <= 5; ++i) {
    Block& b = blocks_[i - 1];
    const int cin = i == 5 ? ch[4] : ch[i];  // deeper level's channels
    const int cout = ch[i - 1];
    in_channels_[i - 1] = cin;
    if (i <= 4) {
      b.has_up = true;
      b.up = ConvTranspose2d(cin, cin, 4, 2, 1, rng);  // exact ×2
    }
    b.conv_a = Conv2d(cin, cin, 3, 1, 1, true, rng);
    b.conv_b = Conv2d(cin, cout, 3, 1, 1, true, rng);
    b.act = PRelu(cout);
    b.bn = BatchNorm2d(cout);
  }
}

Tensor FeaturePreprocess::block_forward(int i, const Tensor& input,
                                        bool training) {
  require(i >= 1 && i <= 5, "fp_block_forward: block index out of range");
  Block& b = blocks_[i - 1];
  require(input.shape().c == in_channels_[i - 1],
          "fp_block_forward: block " + std::to_string(i) + " expects " +
              std::to_string(in_channels_[i - 1]) + " channels, got " +
              std::to_string(input.shape().c));
  Tensor t = input;
  if (b.has_up) t = b.up.forward(t);
  t = b.conv_a.forward(t);
  t = b.conv_b.forward(t);
  t = b.act.forward(t);
  t = b.bn.forward(t, training);
  return t;
}

FeaturePyramid FeaturePreprocess::forward(const FeaturePyramid& f_gen,
                                          bool training) {
  FeaturePyramid f_pre;
  f_pre[4] = block_forward(5, f_gen[4], training);
  for (int i = 4; i >= 1; --i) {
    Tensor processed = block_forward(i, f_pre[i], training);
    require(processed.shape() == f_gen[i - 1].shape(),
            "fp_stage_forward: upsampled path " + processed.shape().str() +
                " does not match skip " + f_gen[i - 1].shape().str());
    f_pre[i - 1] = add(processed, f_gen[i - 1]);
  }
  return f_pre;
}

void FeaturePreprocess::set_frozen(bool f) {
  for (auto& b : blocks_) {
    if (b.has_up) b.up.set_frozen(f);
    b.conv_a.set_frozen(f);
    b.conv_b.set_frozen(f);
    b.act.set_frozen(f);
    b.bn.set_frozen(f);
  }
}

void FeaturePreprocess::visit(const std::string& prefix, StateVisitor& v) {
  for (int i = 1; i <= 5; ++i) {
    Block& b = blocks_[i - 1];
    const std::string base = prefix + ".block" + std::to_string(i);
    if (b.has_up) b.up.visit(base + ".up", v);
    b.conv_a.visit(base + ".conv_a", v);
    b.conv_b.visit(base + ".conv_b", v);
    b.act.visit(base + ".prelu", v);
    b.bn.visit(base + ".bn", v);
  }
}

Tensor fp_block_forward(FeaturePreprocess& fp, int i, const Tensor& input,
                        bool training) {
  return fp.block_forward(i, input, training);
}

FeaturePyramid fp_stage_forward(FeaturePreprocess& fp,
                                const FeaturePyramid& f_gen, bool training) {
  return fp.forward(f_gen, training);
}

}  // namespace paanet
