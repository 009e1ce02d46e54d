// SPDX-License-Identifier: Apache-2.0

#include "paanet/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "paanet/image_io.hpp"

namespace paanet {
namespace {

constexpr int kBgGrid = 5;          // value-noise control points per axis
constexpr double kBgLo = 0.30;      // background intensity band
constexpr double kBgHi = 0.52;

struct ShapeSpec {
  int kind;  // 0 rect, 1 ellipse, 2 triangle
  double cx, cy;
  double ax, ay;        // half extents (rect/ellipse)
  double tx[3], ty[3];  // triangle vertices
};

ShapeSpec draw_shape(Rng& rng, int size, double min_frac, double max_frac) {
  ShapeSpec s{};
  s.kind = static_cast<int>(rng.uniform_int(3));
  const double margin = size * max_frac;
  s.cx = rng.uniform(margin, size - margin);
  s.cy = rng.uniform(margin, size - margin);
  s.ax = rng.uniform(size * min_frac, size * max_frac);
  s.ay = rng.uniform(size * min_frac, size * max_frac);
  if (s.kind == 2) {
    // one vertex per 120° sector, so the triangle cannot be a sliver
    for (int v = 0; v < 3; ++v) {
      const double ang = (v + rng.uniform(0.15, 0.85)) * 2.0 * M_PI / 3.0;
      const double r = rng.uniform(0.7, 1.0) * std::max(s.ax, s.ay);
      s.tx[v] = s.cx + r * std::cos(ang);
      s.ty[v] = s.cy + r * std::sin(ang);
    }
  }
  return s;
}

bool inside(const ShapeSpec& s, double x, double y) {
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

double quantize(double v) {
  return std::min(255.0, std::max(0.0, std::nearbyint(v * 255.0))) / 255.0;
}

}  // namespace

Sample synth_sample(const SynthConfig& cfg, int index) {
  require(cfg.count > 0 && cfg.size >= 16, "synth: bad config");
  require(cfg.min_distractors >= 0 &&
              cfg.max_distractors >= cfg.min_distractors,
          "synth: bad distractor range");
  require(cfg.contrast_lo > 0 && cfg.contrast_hi >= cfg.contrast_lo,
          "synth: bad contrast range");
  Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  const int size = cfg.size;

  // smooth per-channel value-noise background
  double grid[3][kBgGrid][kBgGrid];
  for (auto& ch : grid)
    for (auto& row : ch)
      for (double& v : row) v = rng.uniform(kBgLo, kBgHi);
  Tensor img(Shape(1, 3, size, size));
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < size; ++h)
      for (int w = 0; w < size; ++w) {
        const double gy = static_cast<double>(h) / (size - 1) * (kBgGrid - 1);
        const double gx = static_cast<double>(w) / (size - 1) * (kBgGrid - 1);
        const int y0 = std::min(kBgGrid - 2, static_cast<int>(gy));
        const int x0 = std::min(kBgGrid - 2, static_cast<int>(gx));
        const double fy = gy - y0, fx = gx - x0;
        img.at(0, c, h, w) =
            (1 - fy) * ((1 - fx) * grid[c][y0][x0] + fx * grid[c][y0][x0 + 1]) +
            fy * ((1 - fx) * grid[c][y0 + 1][x0] + fx * grid[c][y0 + 1][x0 + 1]);
      }

  // distractors: same intensity band as the background
  const int extra = cfg.max_distractors - cfg.min_distractors;
  const int distractors =
      cfg.min_distractors +
      (extra > 0 ? static_cast<int>(rng.uniform_int(extra + 1)) : 0);
  for (int d = 0; d < distractors; ++d) {
    ShapeSpec s = draw_shape(rng, size, 1.0 / 12.0, 1.0 / 6.0);
    double fill[3];
    for (double& f : fill) f = rng.uniform(kBgLo, kBgHi);
    for (int h = 0; h < size; ++h)
      for (int w = 0; w < size; ++w)
        if (inside(s, w + 0.5, h + 0.5))
          for (int c = 0; c < 3; ++c) img.at(0, c, h, w) = fill[c];
  }

  // pixel noise over background and distractors alike
  for (std::int64_t i = 0; i < img.numel(); ++i)
    img[i] += rng.uniform(-cfg.noise, cfg.noise);

  // the one salient shape; retry until it covers a sensible area
  Tensor mask(Shape(1, 1, size, size));
  const std::int64_t min_area = size * size / 96;
  std::int64_t area = 0;
  for (int attempt = 0; attempt < 64 && area < min_area; ++attempt) {
    ShapeSpec s = draw_shape(rng, size, 1.0 / 8.0, 1.0 / 5.0);
    mask.data().setZero();
    area = 0;
    for (int h = 0; h < size; ++h)
      for (int w = 0; w < size; ++w)
        if (inside(s, w + 0.5, h + 0.5)) {
          mask.at(0, 0, h, w) = 1.0;
          ++area;
        }
  }
  require(area >= min_area, "synth: could not place a salient shape");

  // flat fill at off-mask mean + contrast offset, per channel
  const double offset = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
  for (int c = 0; c < 3; ++c) {
    double sum = 0;
    std::int64_t n = 0;
    for (int h = 0; h < size; ++h)
      for (int w = 0; w < size; ++w)
        if (mask.at(0, 0, h, w) == 0.0) {
          sum += img.at(0, c, h, w);
          ++n;
        }
    const double fill = sum / n + offset;
    for (int h = 0; h < size; ++h)
      for (int w = 0; w < size; ++w)
        if (mask.at(0, 0, h, w) == 1.0) img.at(0, c, h, w) = fill;
  }

  // optional pixel noise over the salient region; drawn last so configs
  // with salient_noise == 0 produce bit-identical samples to older ones
  if (cfg.salient_noise > 0) {
    const double amp = cfg.noise * cfg.salient_noise;
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < size; ++h)
        for (int w = 0; w < size; ++w)
          if (mask.at(0, 0, h, w) == 1.0)
            img.at(0, c, h, w) += rng.uniform(-amp, amp);
  }

  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = quantize(img[i]);

  Sample out;
  out.image = img;
  out.mask = mask;
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%04d", index);
  out.name = buf;
  return out;
}

Dataset synth_dataset(const SynthConfig& cfg) {
  Dataset data;
  data.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) data.push_back(synth_sample(cfg, i));
  return data;
}

void synth_generate(const std::string& root, const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(root + "/images");
  fs::create_directories(root + "/masks");
  for (int i = 0; i < cfg.count; ++i) {
    Sample s = synth_sample(cfg, i);
    write_png(root + "/images/" + s.name + ".png", tensor_to_rgb_u8(s.image));
    write_png(root + "/masks/" + s.name + ".png", tensor_to_gray_u8(s.mask));
  }
}

}  // namespace paanet
