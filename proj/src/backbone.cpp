// SPDX-License-Identifier: Apache-2.0

#include "paanet/backbone.hpp"

#include <cmath>
#include <string>

#include "paanet/optimizer.hpp"

namespace paanet {

Backbone::Backbone(const BackboneConfig& cfg) : cfg_(cfg) {
  require(cfg.base_channels >= 1, "backbone: base_channels must be >= 1");
  require(cfg.in_channels >= 1, "backbone: in_channels must be >= 1");
  require(cfg.block_depth >= 1, "backbone: block_depth must be >= 1");
  Rng rng(cfg.seed);
  blocks_.resize(5);
  for (int b = 0; b < 5; ++b) {
    const int cin_block = b == 0 ? cfg.in_channels : cfg.base_channels << (b - 1);
    const int cout = cfg.base_channels << b;
    for (int d = 0; d < cfg.block_depth; ++d) {
      const int cin = d == 0 ? cin_block : cout;
      const int stride = (d == 0 && b > 0) ? 2 : 1;
      Unit u;
      u.conv = Conv2d(cin, cout, 3, stride, 1, true, rng);
      u.bn = BatchNorm2d(cout);
      u.act = PRelu(cout);
      blocks_[b].push_back(std::move(u));
    }
  }
}

FeaturePyramid Backbone::forward(const Tensor& x, bool training) {
  require(!blocks_.empty(), "backbone: not built");
  require(x.shape().c == cfg_.in_channels,
          "backbone: input has " + std::to_string(x.shape().c) +
              " channels, config says " + std::to_string(cfg_.in_channels));
  require(x.shape().h % 16 == 0 && x.shape().w % 16 == 0,
          "backbone: spatial size must be divisible by 16, got " +
              x.shape().str());
  FeaturePyramid pyr;
  Tensor cur = x;
  for (int b = 0; b < 5; ++b) {
    for (auto& u : blocks_[b]) {
      cur = u.conv.forward(cur);
      cur = u.bn.forward(cur, training);
      cur = u.act.forward(cur);
    }
    pyr[b] = cur;
  }
  return pyr;
}

void Backbone::set_frozen(bool f) {
  frozen_ = f;
  for (auto& block : blocks_)
    for (auto& u : block) {
      u.conv.set_frozen(f);
      u.bn.set_frozen(f);
      u.act.set_frozen(f);
    }
}

void Backbone::visit(const std::string& prefix, StateVisitor& v) {
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    for (std::size_t d = 0; d < blocks_[b].size(); ++d) {
      const std::string base =
          prefix + ".block" + std::to_string(b + 1) + "." + std::to_string(d);
      blocks_[b][d].conv.visit(base + ".conv", v);
      blocks_[b][d].bn.visit(base + ".bn", v);
      blocks_[b][d].act.visit(base + ".prelu", v);
    }
  v.flag(prefix + ".frozen", frozen_, [this](bool f) { set_frozen(f); });
}

Backbone build_backbone(const BackboneConfig& cfg) { return Backbone(cfg); }

FeaturePyramid gfe_forward(Backbone& backbone, const Tensor& x, bool training) {
  return backbone.forward(x, training);
}

void set_frozen(Backbone& backbone, bool frozen) { backbone.set_frozen(frozen); }

namespace {

// Pretext shapes, a trimmed copy of the saliency generator's repertoire.
struct PretextShape {
  int kind;  // 0 rect, 1 ellipse, 2 triangle
  double cx, cy, ax, ay;
  double tx[3], ty[3];
};

PretextShape pretext_shape(Rng& rng, int size, int kind, double min_frac,
                           double max_frac) {
  PretextShape s{};
  s.kind = kind;
  const double margin = size * max_frac;
  s.cx = rng.uniform(margin, size - margin);
  s.cy = rng.uniform(margin, size - margin);
  s.ax = rng.uniform(size * min_frac, size * max_frac);
  s.ay = rng.uniform(size * min_frac, size * max_frac);
  if (s.kind == 2) {
    for (int v = 0; v < 3; ++v) {
      const double ang = (v + rng.uniform(0.15, 0.85)) * 2.0 * M_PI / 3.0;
      const double r = rng.uniform(0.7, 1.0) * std::max(s.ax, s.ay);
      s.tx[v] = s.cx + r * std::cos(ang);
      s.ty[v] = s.cy + r * std::sin(ang);
    }
  }
  return s;
}

bool pretext_inside(const PretextShape& s, double x, double y) {
  switch (s.kind) {
    case 0:
      return std::abs(x - s.cx) <= s.ax && std::abs(y - s.cy) <= s.ay;
    case 1: {
      const double u = (x - s.cx) / s.ax, v = (y - s.cy) / s.ay;
      return u * u + v * v <= 1.0;
    }
    default: {
      bool neg = false, pos = false;
      for (int v = 0; v < 3; ++v) {
        const int u = (v + 1) % 3;
        const double d = (s.tx[u] - s.tx[v]) * (y - s.ty[v]) -
                         (s.ty[u] - s.ty[v]) * (x - s.tx[v]);
        neg = neg || d < 0;
        pos = pos || d > 0;
      }
      return !(neg && pos);
    }
  }
}

// Pretext batches live in the same domain the saliency stages later see:
// smooth value-noise backgrounds, in-band distractor shapes, and — for
// classes 0..2 — one flat shape offset above the background band.  The
// label is the offset shape's silhouette (0 rect, 1 ellipse, 2 triangle)
// or 3 when nothing sits outside the band.  Solving it needs exactly the
// low-contrast flat-region evidence downstream stages feed on, which is
// what makes the frozen backbone worth keeping.
Tensor pretext_batch(int n, int size, Rng& rng, std::vector<int>& labels) {
  constexpr int kGrid = 4;
  constexpr double kLo = 0.30, kHi = 0.52;
  Tensor x(Shape(n, 3, size, size));
  labels.resize(n);
  for (int i = 0; i < n; ++i) {
    double grid[3][kGrid][kGrid];
    for (auto& ch : grid)
      for (auto& row : ch)
        for (double& v : row) v = rng.uniform(kLo, kHi);
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < size; ++h)
        for (int w = 0; w < size; ++w) {
          const double gy = static_cast<double>(h) / (size - 1) * (kGrid - 1);
          const double gx = static_cast<double>(w) / (size - 1) * (kGrid - 1);
          const int y0 = std::min(kGrid - 2, static_cast<int>(gy));
          const int x0 = std::min(kGrid - 2, static_cast<int>(gx));
          const double fy = gy - y0, fx = gx - x0;
          x.at(i, c, h, w) =
              (1 - fy) *
                  ((1 - fx) * grid[c][y0][x0] + fx * grid[c][y0][x0 + 1]) +
              fy * ((1 - fx) * grid[c][y0 + 1][x0] +
                    fx * grid[c][y0 + 1][x0 + 1]);
        }

    const int nd = static_cast<int>(rng.uniform_int(3));
    for (int d = 0; d < nd; ++d) {
      const int kind = static_cast<int>(rng.uniform_int(3));
      PretextShape s = pretext_shape(rng, size, kind, 1.0 / 12.0, 1.0 / 6.0);
      double fill[3];
      for (double& f : fill) f = rng.uniform(kLo, kHi);
      for (int h = 0; h < size; ++h)
        for (int w = 0; w < size; ++w)
          if (pretext_inside(s, w + 0.5, h + 0.5))
            for (int c = 0; c < 3; ++c) x.at(i, c, h, w) = fill[c];
    }

    const int cls = static_cast<int>(rng.uniform_int(4));
    labels[i] = cls;
    if (cls < 3) {
      PretextShape s = pretext_shape(rng, size, cls, 1.0 / 8.0, 1.0 / 5.0);
      const double offset = rng.uniform(0.08, 0.38);
      double fill[3];
      for (double& f : fill) f = rng.uniform(kLo, kHi) + offset;
      for (int h = 0; h < size; ++h)
        for (int w = 0; w < size; ++w)
          if (pretext_inside(s, w + 0.5, h + 0.5))
            for (int c = 0; c < 3; ++c) x.at(i, c, h, w) = fill[c];
    }

    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < size; ++h)
        for (int w = 0; w < size; ++w)
          x.at(i, c, h, w) += rng.uniform(-0.04, 0.04);
  }
  return x;
}

}  // namespace

std::pair<double, double> pretrain_backbone(Backbone& backbone, int steps,
                                            std::uint64_t seed) {
  require(!backbone.frozen(), "pretrain_backbone: backbone is frozen");
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const int kClasses = 4, kBatch = 8, kSize = 32;

  Rng init_rng(seed + 1);
  Conv2d head(backbone.level_channels(5), kClasses, 1, 1, 0, true, init_rng);

  ParamCollector pc;
  backbone.visit("backbone", pc);
  head.visit("head", pc);

  Sgd opt(1e-2, 0.9, 0.0);
  double first = 0, last = 0;
  for (int s = 0; s < steps; ++s) {
    std::vector<int> labels;
    Tensor x = pretext_batch(kBatch, kSize, rng, labels);
    Graph graph;
    Tensor loss;
    {
      Graph::Scope scope(graph);
      FeaturePyramid pyr = backbone.forward(x, true);
      Tensor logits = head.forward(global_avg_pool(pyr[4]));
      loss = softmax_cross_entropy(logits, labels);
      graph.backward(loss);
    }
    if (s == 0) first = loss.scalar();
    last = loss.scalar();
    opt.step(pc.params);
  }
  return {first, last};
}

}  // namespace paanet
