// SPDX-License-Identifier: Apache-2.0

#include "paanet/saliency_features.hpp"

#include <string>

namespace paanet {

namespace {

// Sobel coefficients; the x kernel's middle column / y kernel's middle row
// are the structurally fixed zeros.
constexpr double kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr double kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

Tensor make_kernel(int channels, const double* coef, int fixed_axis) {
  Tensor w(Shape(channels, 1, 3, 3));
  Tensor mask = Tensor::full(Shape(channels, 1, 3, 3), 1.0);
  for (int c = 0; c < channels; ++c)
    for (int kh = 0; kh < 3; ++kh)
      for (int kw = 0; kw < 3; ++kw) {
        w[c * 9 + kh * 3 + kw] = coef[kh * 3 + kw];
        // fixed_axis 0: middle column (kw == 1); 1: middle row (kh == 1)
        if ((fixed_axis == 0 && kw == 1) || (fixed_axis == 1 && kh == 1))
          mask[c * 9 + kh * 3 + kw] = 0.0;
      }
  w.set_learn_mask(mask);
  w.set_requires_grad(true);
  return w;
}

}  // namespace

ContrastOperator::ContrastOperator(int in_channels, int out_channels, Rng& rng)
    : kx_(make_kernel(in_channels, kSobelX, 0)),
      ky_(make_kernel(in_channels, kSobelY, 1)),
      norm_(Conv2d(in_channels, out_channels, 1, 1, 0, true, rng)),
      in_channels_(in_channels) {}

Tensor ContrastOperator::saliency_mask(const Tensor& x) const {
  require(x.shape().c == in_channels_,
          "contrast_operator: input has " + std::to_string(x.shape().c) +
              " channels, operator expects " + std::to_string(in_channels_));
  Tensor gx = depthwise_conv3x3(x, kx_);
  Tensor gy = depthwise_conv3x3(x, ky_);
  Tensor env = add(square(gx), square(gy));
  Tensor cos = cosine_similarity_channelwise(x, env);
  return affine(cos, -0.5, 0.5);  // dissimilarity → weight
}

Tensor ContrastOperator::forward(const Tensor& x) const {
  Tensor masked = mul_channel_mask(x, saliency_mask(x));
  return norm_.forward(masked);
}

void ContrastOperator::set_frozen(bool f) {
  frozen_ = f;
  kx_.set_requires_grad(!f);
  ky_.set_requires_grad(!f);
  norm_.set_frozen(f);
}

void ContrastOperator::visit(const std::string& prefix, StateVisitor& v) {
  v.param(prefix + ".kx", kx_);
  v.param(prefix + ".ky", ky_);
  norm_.visit(prefix + ".norm", v);
  v.flag(prefix + ".frozen", frozen_, [this](bool f) { set_frozen(f); });
}

Tensor cross_scale_assemble(const FeaturePyramid& p, int i) {
  require(i >= 1 && i <= 5, "cross_scale_assemble: scale index out of range");
  const Shape& s = p[i - 1].shape();
  std::vector<Tensor> parts;
  if (i > 1) parts.push_back(bilinear_resize(p[i - 2], s.h, s.w));
  parts.push_back(p[i - 1]);
  if (i < 5) parts.push_back(bilinear_resize(p[i], s.h, s.w));
  return concat_channels(parts);
}

SaliencyFeatureExtractor::SaliencyFeatureExtractor(
    const SFEConfig& cfg, const std::array<int, 5>& in_channels, Rng& rng)
    : cfg_(cfg) {
  require(cfg.order >= 1, "sfe: order must be >= 1");
  std::array<int, 5> cs;
  for (int i = 0; i < 5; ++i) {
    cs[i] = cfg_.channels[i] > 0 ? cfg_.channels[i] : in_channels[i];
    require(cs[i] >= 1, "sfe: canonical channels must be positive");
    cfg_.channels[i] = cs[i];
  }
  std::array<int, 5> cur = in_channels;
  operators_.resize(cfg.order);
  for (int k = 0; k < cfg.order; ++k) {
    for (int i = 1; i <= 5; ++i) {
      int assembled = cur[i - 1];
      if (i > 1) assembled += cur[i - 2];
      if (i < 5) assembled += cur[i];
      operators_[k][i - 1] = ContrastOperator(assembled, cs[i - 1], rng);
    }
    cur = cs;
  }
}

FeaturePyramid SaliencyFeatureExtractor::forward(
    const FeaturePyramid& f_pre) const {
  FeaturePyramid cur = f_pre;
  for (std::size_t k = 0; k < operators_.size(); ++k) {
    FeaturePyramid next;
    for (int i = 1; i <= 5; ++i)
      next[i - 1] = operators_[k][i - 1].forward(cross_scale_assemble(cur, i));
    cur = next;
  }
  return cur;
}

void SaliencyFeatureExtractor::set_frozen(bool f) {
  for (auto& bank : operators_)
    for (auto& op : bank) op.set_frozen(f);
}

void SaliencyFeatureExtractor::visit(const std::string& prefix,
                                     StateVisitor& v) {
  for (std::size_t k = 0; k < operators_.size(); ++k)
    for (int i = 0; i < 5; ++i)
      operators_[k][i].visit(prefix + ".order" + std::to_string(k + 1) +
                                 ".scale" + std::to_string(i + 1),
                             v);
}

Tensor contrast_operator_forward(const ContrastOperator& op, const Tensor& x) {
  return op.forward(x);
}

FeaturePyramid sfe_stage_forward(const SaliencyFeatureExtractor& sfe,
                                 const FeaturePyramid& f_pre) {
  return sfe.forward(f_pre);
}

}  // namespace paanet
