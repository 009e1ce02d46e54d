// SPDX-License-Identifier: Apache-2.0

#include "paanet/aggregation.hpp"

#include <string>

namespace paanet {

FeatureAggregation::FeatureAggregation(const std::array<int, 5>& in_channels,
                                       Rng& rng) {
  for (int i = 0; i < 5; ++i) {
    heads_[i].conv = Conv2d(in_channels[i], 1, 3, 1, 1, true, rng);
    heads_[i].bn = BatchNorm2d(1);
    heads_[i].act = PRelu(1);
  }
  fuse_ = Conv2d(5, 1, 1, 1, 0, true, rng);
}

Tensor FeatureAggregation::branch_forward(int i, const Tensor& f_i,
                                          int up_factor, bool training) {
  require(i >= 1 && i <= 5, "fa_branch_forward: scale index out of range");
  require(up_factor >= 1, "fa_branch_forward: up factor must be >= 1");
  Head& h = heads_[i - 1];
  Tensor t = h.conv.forward(f_i);
  t = h.bn.forward(t, training);
  t = h.act.forward(t);
  if (up_factor > 1)
    t = bilinear_resize(t, f_i.shape().h * up_factor,
                        f_i.shape().w * up_factor);
  return t;
}

ModelOutputs FeatureAggregation::forward(const FeaturePyramid& f_saliency,
                                         bool training) {
  const int full_h = f_saliency[0].shape().h;
  const int full_w = f_saliency[0].shape().w;
  std::vector<Tensor> logits;
  for (int i = 1; i <= 5; ++i) {
    const int j = 1 << (i - 1);
    const Shape& s = f_saliency[i - 1].shape();
    require(s.h * j == full_h && s.w * j == full_w,
            "fa_fuse_forward: scale " + std::to_string(i) + " at " + s.str() +
                " does not upsample by " + std::to_string(j) +
                " to the input resolution");
    logits.push_back(branch_forward(i, f_saliency[i - 1], j, training));
  }
  Tensor fused_logits = fuse_.forward(concat_channels(logits));
  ModelOutputs out;
  for (int i = 0; i < 5; ++i) out.side[i] = sigmoid(logits[i]);
  out.fused = sigmoid(fused_logits);
  return out;
}

void FeatureAggregation::set_frozen(bool f) {
  for (auto& h : heads_) {
    h.conv.set_frozen(f);
    h.bn.set_frozen(f);
    h.act.set_frozen(f);
  }
  fuse_.set_frozen(f);
}

void FeatureAggregation::visit(const std::string& prefix, StateVisitor& v) {
  for (int i = 0; i < 5; ++i) {
    const std::string base = prefix + ".head" + std::to_string(i + 1);
    heads_[i].conv.visit(base + ".conv", v);
    heads_[i].bn.visit(base + ".bn", v);
    heads_[i].act.visit(base + ".prelu", v);
  }
  fuse_.visit(prefix + ".fuse", v);
}

Tensor fa_branch_forward(FeatureAggregation& fa, int i, const Tensor& f_i,
                         int up_factor, bool training) {
  return fa.branch_forward(i, f_i, up_factor, training);
}

ModelOutputs fa_fuse_forward(FeatureAggregation& fa,
                             const FeaturePyramid& f_saliency, bool training) {
  return fa.forward(f_saliency, training);
}

}  // namespace paanet
