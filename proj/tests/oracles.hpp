// SPDX-License-Identifier: Apache-2.0
//
// Independent scalar reference implementations used to cross-check the
// library.  Everything here is deliberately written as plain loops over
// pixels with no shared helpers from src/, so a bug in the library cannot
// hide in its own oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "paanet/tensor.hpp"

namespace oracle {

using Tensor = paanet::TensorT<double>;

struct Prf {
  double precision, recall, fpr, f;
};

// pixel-by-pixel confusion counting at one threshold
inline Prf prf(const Tensor& pred, const Tensor& gt, double t) {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] > t;
    const bool g = gt[i] != 0.0;
    if (p && g) ++tp;
    if (p && !g) ++fp;
    if (!p && g) ++fn;
    if (!p && !g) ++tn;
  }
  Prf r{0, 0, 0, 0};
  if (tp + fp > 0) r.precision = double(tp) / double(tp + fp);
  if (tp + fn > 0) r.recall = double(tp) / double(tp + fn);
  if (fp + tn > 0) r.fpr = double(fp) / double(fp + tn);
  const double den = 0.3 * r.precision + r.recall;
  if (den > 0) r.f = 1.3 * r.precision * r.recall / den;
  return r;
}

inline double mae(const Tensor& pred, const Tensor& gt) {
  double s = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i)
    s += pred[i] > gt[i] ? pred[i] - gt[i] : gt[i] - pred[i];
  return s / double(pred.numel());
}

// dataset Max/Mean F over the 256-threshold sweep, by brute force
inline std::pair<double, double> fm_max_mean(
    const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  double max_fm = 0, sum_fm = 0;
  for (int i = 0; i < 256; ++i) {
    const double t = double(i) / 255.0;
    double f_mean = 0;
    for (const auto& [pred, gt] : pairs) f_mean += prf(pred, gt, t).f;
    f_mean /= double(pairs.size());
    max_fm = std::max(max_fm, f_mean);
    sum_fm += f_mean;
  }
  return {max_fm, sum_fm / 256.0};
}

// structure measure, transliterated region by region
inline double s_measure(const Tensor& pred, const Tensor& gt) {
  const double eps = std::numeric_limits<double>::epsilon();
  const std::int64_t H = pred.shape().h, W = pred.shape().w;
  const double N = double(H * W);

  double mu_gt = 0, mu_p = 0;
  for (std::int64_t i = 0; i < H * W; ++i) {
    mu_gt += gt[i];
    mu_p += pred[i];
  }
  mu_gt /= N;
  mu_p /= N;
  if (mu_gt == 0.0) return 1.0 - mu_p;
  if (mu_gt == 1.0) return mu_p;

  auto object_part = [eps](const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double m = 0;
    for (double v : xs) m += v;
    m /= double(xs.size());
    double var = 0;
    for (double v : xs) var += (v - m) * (v - m);
    const double sd =
        xs.size() > 1 ? std::sqrt(var / double(xs.size() - 1)) : 0.0;
    return 2.0 * m / (m * m + 1.0 + sd + eps);
  };
  std::vector<double> fg, bg;
  for (std::int64_t i = 0; i < H * W; ++i) {
    if (gt[i] != 0.0)
      fg.push_back(pred[i]);
    else
      bg.push_back(1.0 - pred[i]);
  }
  const double so = mu_gt * object_part(fg) + (1 - mu_gt) * object_part(bg);

  double tot = 0, xs = 0, ys = 0;
  for (std::int64_t h = 0; h < H; ++h)
    for (std::int64_t w = 0; w < W; ++w)
      if (gt.at(0, 0, h, w) != 0.0) {
        tot += 1;
        xs += double(w + 1);
        ys += double(h + 1);
      }
  const std::int64_t X = std::int64_t(std::floor(xs / tot + 0.5));
  const std::int64_t Y = std::int64_t(std::floor(ys / tot + 0.5));

  auto ssim_region = [&](std::int64_t h0, std::int64_t h1, std::int64_t w0,
                         std::int64_t w1) {
    const double n = double((h1 - h0) * (w1 - w0));
    if (n <= 0) return 0.0;
    double mx = 0, my = 0;
    for (std::int64_t h = h0; h < h1; ++h)
      for (std::int64_t w = w0; w < w1; ++w) {
        mx += pred.at(0, 0, h, w);
        my += gt.at(0, 0, h, w);
      }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, vxy = 0;
    for (std::int64_t h = h0; h < h1; ++h)
      for (std::int64_t w = w0; w < w1; ++w) {
        const double dx = pred.at(0, 0, h, w) - mx;
        const double dy = gt.at(0, 0, h, w) - my;
        vx += dx * dx;
        vy += dy * dy;
        vxy += dx * dy;
      }
    vx /= n - 1 + eps;
    vy /= n - 1 + eps;
    vxy /= n - 1 + eps;
    const double a = 4 * mx * my * vxy;
    const double b = (mx * mx + my * my) * (vx + vy);
    if (a != 0) return a / (b + eps);
    return b == 0 ? 1.0 : 0.0;
  };
  const double w1 = double(X * Y) / N, w2 = double((W - X) * Y) / N,
               w3 = double(X * (H - Y)) / N;
  const double sr = w1 * ssim_region(0, Y, 0, X) +
                    w2 * ssim_region(0, Y, X, W) +
                    w3 * ssim_region(Y, H, 0, X) +
                    (1 - w1 - w2 - w3) * ssim_region(Y, H, X, W);

  const double q = 0.5 * so + 0.5 * sr;
  return q < 0 ? 0.0 : q;
}

// enhanced-alignment measure for one already-binarized prediction,
// normalized by W*H, computed over the full alignment matrix
inline double e_measure_binary(const Tensor& fm, const Tensor& gt) {
  const double eps = std::numeric_limits<double>::epsilon();
  const std::int64_t n = fm.numel();
  double sum_fm = 0, sum_gt = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    sum_fm += fm[i];
    sum_gt += gt[i];
  }
  if (sum_gt == 0) {
    double s = 0;
    for (std::int64_t i = 0; i < n; ++i) s += 1.0 - fm[i];
    return s / double(n);
  }
  if (sum_gt == double(n)) {
    return sum_fm / double(n);
  }
  const double mu_fm = sum_fm / double(n), mu_gt = sum_gt / double(n);
  double s = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double af = fm[i] - mu_fm, ag = gt[i] - mu_gt;
    const double align = 2 * ag * af / (ag * ag + af * af + eps);
    s += (align + 1) * (align + 1) / 4.0;
  }
  return s / double(n);
}

// the contrast operator on one (1,C,H,W) input, as scalar loops: Sobel-x/y
// depthwise conv (zero padding), squared-gradient environment, channel
// cosine, (1-cos)/2 mask, then the mask multiply.  The 1x1 channel-norm
// conv is applied with the weights/bias passed in.
inline Tensor contrast_reference(const Tensor& x, const Tensor& kx,
                                 const Tensor& ky, const Tensor& norm_w,
                                 const Tensor& norm_b, double eps_cos = 1e-8) {
  const std::int64_t C = x.shape().c, H = x.shape().h, W = x.shape().w;
  Tensor env(paanet::Shape(1, C, H, W));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w) {
        double gx = 0, gy = 0;
        for (int dh = -1; dh <= 1; ++dh)
          for (int dw = -1; dw <= 1; ++dw) {
            const std::int64_t hh = h + dh, ww = w + dw;
            if (hh < 0 || hh >= H || ww < 0 || ww >= W) continue;
            gx += kx[c * 9 + (dh + 1) * 3 + (dw + 1)] * x.at(0, c, hh, ww);
            gy += ky[c * 9 + (dh + 1) * 3 + (dw + 1)] * x.at(0, c, hh, ww);
          }
        env.at(0, c, h, w) = gx * gx + gy * gy;
      }

  Tensor masked(paanet::Shape(1, C, H, W));
  for (std::int64_t h = 0; h < H; ++h)
    for (std::int64_t w = 0; w < W; ++w) {
      double dot = 0, nx = 0, ne = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        dot += x.at(0, c, h, w) * env.at(0, c, h, w);
        nx += x.at(0, c, h, w) * x.at(0, c, h, w);
        ne += env.at(0, c, h, w) * env.at(0, c, h, w);
      }
      double cos = 0;
      if (std::sqrt(nx) >= eps_cos && std::sqrt(ne) >= eps_cos)
        cos = dot / (std::sqrt(nx) * std::sqrt(ne));
      const double m = (1.0 - cos) / 2.0;
      for (std::int64_t c = 0; c < C; ++c)
        masked.at(0, c, h, w) = x.at(0, c, h, w) * m;
    }

  const std::int64_t Cout = norm_w.shape().n;
  Tensor out(paanet::Shape(1, Cout, H, W));
  for (std::int64_t o = 0; o < Cout; ++o)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w) {
        double acc = norm_b.valid() ? norm_b[o] : 0.0;
        for (std::int64_t c = 0; c < C; ++c)
          acc += norm_w[o * C + c] * masked.at(0, c, h, w);
        out.at(0, o, h, w) = acc;
      }
  return out;
}

}  // namespace oracle
