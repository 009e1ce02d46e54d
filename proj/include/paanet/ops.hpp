// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_OPS_HPP
#define PAANET_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "paanet/tensor.hpp"
#include "paanet/types.hpp"

namespace paanet {

namespace detail {

// Gather k×k patches of one (C,H,W) image into a (C·k·k) × (PH·PW) matrix.
// Position p = (ph,pw) reads image row ph·stride − pad + kh (likewise cols);
// out-of-bounds taps stay zero.  conv2d uses PH=output size, the transposed
// conv backward uses PH=its input size; the index map is the same.
template <typename S>
void im2col(const S* img, int C, int H, int W, int k, int stride, int pad,
            int PH, int PW, RowMatT<S>& cols) {
  cols.setZero(static_cast<Eigen::Index>(C) * k * k,
               static_cast<Eigen::Index>(PH) * PW);
  const std::ptrdiff_t npos = static_cast<std::ptrdiff_t>(PH) * PW;
  for (int c = 0; c < C; ++c) {
    const S* plane = img + static_cast<std::ptrdiff_t>(c) * H * W;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        S* dst = cols.data() + (static_cast<std::ptrdiff_t>(c) * k * k +
                                kh * k + kw) * npos;
        for (int ph = 0; ph < PH; ++ph) {
          const int ih = ph * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          const S* srow = plane + static_cast<std::ptrdiff_t>(ih) * W;
          S* drow = dst + static_cast<std::ptrdiff_t>(ph) * PW;
          for (int pw = 0; pw < PW; ++pw) {
            const int iw = pw * stride - pad + kw;
            if (iw >= 0 && iw < W) drow[pw] = srow[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add the column matrix back into the image.
template <typename S>
void col2im_add(const RowMatT<S>& cols, int C, int H, int W, int k, int stride,
                int pad, int PH, int PW, S* img) {
  const std::ptrdiff_t npos = static_cast<std::ptrdiff_t>(PH) * PW;
  for (int c = 0; c < C; ++c) {
    S* plane = img + static_cast<std::ptrdiff_t>(c) * H * W;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const S* src = cols.data() + (static_cast<std::ptrdiff_t>(c) * k * k +
                                      kh * k + kw) * npos;
        for (int ph = 0; ph < PH; ++ph) {
          const int ih = ph * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          S* drow = plane + static_cast<std::ptrdiff_t>(ih) * W;
          const S* srow = src + static_cast<std::ptrdiff_t>(ph) * PW;
          for (int pw = 0; pw < PW; ++pw) {
            const int iw = pw * stride - pad + kw;
            if (iw >= 0 && iw < W) drow[iw] += srow[pw];
          }
        }
      }
    }
  }
}

template <typename S>
bool any_grad(std::initializer_list<const TensorT<S>*> ts) {
  for (const auto* t : ts)
    if (t->valid() && t->requires_grad()) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
  TensorT<S> out(a.shape());
  out.data() = a.data() + b.data();
  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    g->record({{an, bn}, on, [an, bn, on] {
                 if (an->requires_grad) an->grad += on->grad;
                 if (bn->requires_grad) bn->grad += on->grad;
               }});
  }
  return out;
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
  TensorT<S> out(a.shape());
  out.data() = a.data() * b.data();
  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    g->record({{an, bn}, on, [an, bn, on] {
                 if (an->requires_grad) an->grad += on->grad * bn->data;
                 if (bn->requires_grad) bn->grad += on->grad * an->data;
               }});
  }
  return out;
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S k) {
  TensorT<S> out(a.shape());
  out.data() = a.data() * k;
  auto* g = GraphT<S>::active();
  if (g && a.requires_grad()) {
    out.set_requires_grad(true);
    auto an = a.node(), on = out.node();
    g->record({{an}, on, [an, on, k] { an->grad += on->grad * k; }});
  }
  return out;
}

/// y = a·x + b with scalar constants; how (1−s)/2 style remaps are built.
template <typename S>
TensorT<S> affine(const TensorT<S>& x, S a, S b) {
  TensorT<S> out(x.shape());
  out.data() = x.data() * a + b;
  auto* g = GraphT<S>::active();
  if (g && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    g->record({{xn}, on, [xn, on, a] { xn->grad += on->grad * a; }});
  }
  return out;
}

template <typename S>
TensorT<S> square(const TensorT<S>& a) {
  TensorT<S> out(a.shape());
  out.data() = a.data().square();
  auto* g = GraphT<S>::active();
  if (g && a.requires_grad()) {
    out.set_requires_grad(true);
    auto an = a.node(), on = out.node();
    g->record({{an}, on, [an, on] {
                 an->grad += on->grad * S(2) * an->data;
               }});
  }
  return out;
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& a) {
  TensorT<S> out(a.shape());
  out.data() = S(1) / (S(1) + (-a.data()).exp());
  auto* g = GraphT<S>::active();
  if (g && a.requires_grad()) {
    out.set_requires_grad(true);
    auto an = a.node(), on = out.node();
    g->record({{an}, on, [an, on] {
                 an->grad += on->grad * on->data * (S(1) - on->data);
               }});
  }
  return out;
}

template <typename S>
TensorT<S> sum(const TensorT<S>& a) {
  TensorT<S> out(Shape(1, 1, 1, 1));
  out.data()(0) = a.data().sum();
  auto* g = GraphT<S>::active();
  if (g && a.requires_grad()) {
    out.set_requires_grad(true);
    auto an = a.node(), on = out.node();
    g->record({{an}, on, [an, on] { an->grad += on->grad(0); }});
  }
  return out;
}

template <typename S>
TensorT<S> mean(const TensorT<S>& a) {
  const S inv = S(1) / static_cast<S>(a.numel());
  TensorT<S> out(Shape(1, 1, 1, 1));
  out.data()(0) = a.data().sum() * inv;
  auto* g = GraphT<S>::active();
  if (g && a.requires_grad()) {
    out.set_requires_grad(true);
    auto an = a.node(), on = out.node();
    g->record({{an}, on, [an, on, inv] { an->grad += on->grad(0) * inv; }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// prelu: y = x for x ≥ 0, a·x otherwise.  Slope is scalar or per-channel.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> prelu(const TensorT<S>& x, const TensorT<S>& slope) {
  const Shape& s = x.shape();
  const std::int64_t ns = slope.numel();
  require(ns == 1 || ns == s.c,
          "prelu: slope must be scalar or per-channel (C=" +
              std::to_string(s.c) + ", got " + std::to_string(ns) + ")");
  TensorT<S> out(s);
  const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const S a = slope.data()(ns == 1 ? 0 : c);
      const std::int64_t off = (static_cast<std::int64_t>(n) * s.c + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const S v = x.data()(off + i);
        out.data()(off + i) = v >= S(0) ? v : a * v;
      }
    }
  }
  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&x, &slope})) {
    out.set_requires_grad(true);
    auto xn = x.node(), an = slope.node(), on = out.node();
    g->record({{xn, an}, on, [xn, an, on, s, ns, plane] {
                 for (int n = 0; n < s.n; ++n) {
                   for (int c = 0; c < s.c; ++c) {
                     const Eigen::Index ai = ns == 1 ? 0 : c;
                     const S a = an->data(ai);
                     const std::int64_t off =
                         (static_cast<std::int64_t>(n) * s.c + c) * plane;
                     for (std::int64_t i = 0; i < plane; ++i) {
                       const S v = xn->data(off + i);
                       const S dy = on->grad(off + i);
                       if (xn->requires_grad)
                         xn->grad(off + i) += v >= S(0) ? dy : a * dy;
                       if (an->requires_grad && v < S(0))
                         an->grad(ai) += dy * v;
                     }
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d, weight (Cout, Cin, k, k), zero padding.  im2col + GEMM.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv2d(const TensorT<S>& input, const TensorT<S>& weight,
                  const TensorT<S>& bias = TensorT<S>(), int stride = 1,
                  int padding = 0) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(ws.h == ws.w, "conv2d: non-square kernel");
  require(xs.c == ws.c, "conv2d: input channels " + std::to_string(xs.c) +
                            " != weight C_in " + std::to_string(ws.c));
  require(stride >= 1 && padding >= 0, "conv2d: bad stride/padding");
  const int k = ws.h, cout = ws.n, cin = ws.c;
  require(!bias.valid() || bias.numel() == cout, "conv2d: bias size");
  const int ho = (xs.h + 2 * padding - k) / stride + 1;
  const int wo = (xs.w + 2 * padding - k) / stride + 1;
  require(xs.h + 2 * padding >= k && xs.w + 2 * padding >= k,
          "conv2d: non-positive output size for input " + xs.str());

  TensorT<S> out(Shape(xs.n, cout, ho, wo));
  const std::ptrdiff_t in_sz = static_cast<std::ptrdiff_t>(cin) * xs.h * xs.w;
  const std::ptrdiff_t out_sz = static_cast<std::ptrdiff_t>(cout) * ho * wo;
  const Eigen::Index R = static_cast<Eigen::Index>(cin) * k * k;
  const Eigen::Index P = static_cast<Eigen::Index>(ho) * wo;
  Eigen::Map<const RowMatT<S>> wm(weight.data().data(), cout, R);
  RowMatT<S> cols;
  for (int n = 0; n < xs.n; ++n) {
    detail::im2col(input.data().data() + n * in_sz, cin, xs.h, xs.w, k, stride,
                   padding, ho, wo, cols);
    Eigen::Map<RowMatT<S>> om(out.data().data() + n * out_sz, cout, P);
    om.noalias() = wm * cols;
    if (bias.valid())
      for (int co = 0; co < cout; ++co)
        om.row(co).array() += bias.data()(co);
  }

  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&input, &weight, &bias})) {
    out.set_requires_grad(true);
    auto xn = input.node(), wn = weight.node(), on = out.node();
    typename GraphT<S>::NodePtr bn;
    if (bias.valid()) bn = bias.node();
    std::vector<typename GraphT<S>::NodePtr> ins = {xn, wn};
    if (bn) ins.push_back(bn);
    const int N = xs.n, H = xs.h, W = xs.w;
    g->record({std::move(ins), on,
               [xn, wn, bn, on, N, cin, H, W, cout, k, stride, padding, ho, wo,
                in_sz, out_sz, R, P] {
                 Eigen::Map<const RowMatT<S>> wm(wn->data.data(), cout, R);
                 RowMatT<S> cols, dcols;
                 for (int n = 0; n < N; ++n) {
                   Eigen::Map<const RowMatT<S>> dy(on->grad.data() + n * out_sz,
                                                   cout, P);
                   if (wn->requires_grad) {
                     detail::im2col(xn->data.data() + n * in_sz, cin, H, W, k,
                                    stride, padding, ho, wo, cols);
                     Eigen::Map<RowMatT<S>> dw(wn->grad.data(), cout, R);
                     dw.noalias() += dy * cols.transpose();
                   }
                   if (bn && bn->requires_grad)
                     for (int co = 0; co < cout; ++co)
                       bn->grad(co) += dy.row(co).sum();
                   if (xn->requires_grad) {
                     dcols.noalias() = wm.transpose() * dy;
                     detail::col2im_add(dcols, cin, H, W, k, stride, padding,
                                        ho, wo, xn->grad.data() + n * in_sz);
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv_transpose2d, weight (Cin, Cout, k, k); out = (in−1)·stride − 2·pad + k.
// Forward is the adjoint of the matching conv2d (scatter through col2im).
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv_transpose2d(const TensorT<S>& input, const TensorT<S>& weight,
                            int stride, int padding = 0) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(ws.h == ws.w, "conv_transpose2d: non-square kernel");
  require(xs.c == ws.n, "conv_transpose2d: input channels " +
                            std::to_string(xs.c) + " != weight C_in " +
                            std::to_string(ws.n));
  require(stride >= 1 && padding >= 0, "conv_transpose2d: bad stride/padding");
  const int k = ws.h, cin = ws.n, cout = ws.c;
  const int ho = (xs.h - 1) * stride - 2 * padding + k;
  const int wo = (xs.w - 1) * stride - 2 * padding + k;
  require(ho >= 1 && wo >= 1, "conv_transpose2d: non-positive output size");

  TensorT<S> out(Shape(xs.n, cout, ho, wo));
  const std::ptrdiff_t in_sz = static_cast<std::ptrdiff_t>(cin) * xs.h * xs.w;
  const std::ptrdiff_t out_sz = static_cast<std::ptrdiff_t>(cout) * ho * wo;
  const Eigen::Index R = static_cast<Eigen::Index>(cout) * k * k;
  const Eigen::Index P = static_cast<Eigen::Index>(xs.h) * xs.w;
  Eigen::Map<const RowMatT<S>> wm(weight.data().data(), cin, R);
  RowMatT<S> cols;
  for (int n = 0; n < xs.n; ++n) {
    Eigen::Map<const RowMatT<S>> xm(input.data().data() + n * in_sz, cin, P);
    cols.noalias() = wm.transpose() * xm;
    detail::col2im_add(cols, cout, ho, wo, k, stride, padding, xs.h, xs.w,
                       out.data().data() + n * out_sz);
  }

  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&input, &weight})) {
    out.set_requires_grad(true);
    auto xn = input.node(), wn = weight.node(), on = out.node();
    const int N = xs.n, H = xs.h, W = xs.w;
    g->record({{xn, wn}, on,
               [xn, wn, on, N, cin, cout, H, W, k, stride, padding, ho, wo,
                in_sz, out_sz, R, P] {
                 Eigen::Map<const RowMatT<S>> wm(wn->data.data(), cin, R);
                 RowMatT<S> dcols;
                 for (int n = 0; n < N; ++n) {
                   detail::im2col(on->grad.data() + n * out_sz, cout, ho, wo, k,
                                  stride, padding, H, W, dcols);
                   if (xn->requires_grad) {
                     Eigen::Map<RowMatT<S>> dx(xn->grad.data() + n * in_sz, cin,
                                               P);
                     dx.noalias() += wm * dcols;
                   }
                   if (wn->requires_grad) {
                     Eigen::Map<const RowMatT<S>> xm(xn->data.data() + n * in_sz,
                                                     cin, P);
                     Eigen::Map<RowMatT<S>> dw(wn->grad.data(), cin, R);
                     dw.noalias() += xm * dcols.transpose();
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// depthwise_conv3x3: one 3×3 kernel per channel, stride 1, padding 1.
// Weight (C, 1, 3, 3).  The contrast operator's semi-learned kernels.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> depthwise_conv3x3(const TensorT<S>& input, const TensorT<S>& weight) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(ws.n == xs.c && ws.c == 1 && ws.h == 3 && ws.w == 3,
          "depthwise_conv3x3: weight must be (" + std::to_string(xs.c) +
              ",1,3,3), got " + ws.str());
  TensorT<S> out(xs);
  const int H = xs.h, W = xs.w;
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  auto run = [H, W, plane](const S* x, const S* w9, S* y) {
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w) {
        S acc = S(0);
        for (int kh = 0; kh < 3; ++kh) {
          const int ih = h - 1 + kh;
          if (ih < 0 || ih >= H) continue;
          for (int kw = 0; kw < 3; ++kw) {
            const int iw = w - 1 + kw;
            if (iw < 0 || iw >= W) continue;
            acc += x[static_cast<std::int64_t>(ih) * W + iw] * w9[kh * 3 + kw];
          }
        }
        y[static_cast<std::int64_t>(h) * W + w] = acc;
      }
    }
    (void)plane;
  };
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      run(input.data().data() + (static_cast<std::int64_t>(n) * xs.c + c) * plane,
          weight.data().data() + static_cast<std::int64_t>(c) * 9,
          out.data().data() + (static_cast<std::int64_t>(n) * xs.c + c) * plane);

  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&input, &weight})) {
    out.set_requires_grad(true);
    auto xn = input.node(), wn = weight.node(), on = out.node();
    const int N = xs.n, C = xs.c;
    g->record({{xn, wn}, on, [xn, wn, on, N, C, H, W, plane] {
                 for (int n = 0; n < N; ++n) {
                   for (int c = 0; c < C; ++c) {
                     const std::int64_t off =
                         (static_cast<std::int64_t>(n) * C + c) * plane;
                     const S* w9 = wn->data.data() + c * 9;
                     for (int h = 0; h < H; ++h) {
                       for (int w = 0; w < W; ++w) {
                         const S dy = on->grad(off + h * W + w);
                         if (dy == S(0)) continue;
                         for (int kh = 0; kh < 3; ++kh) {
                           const int ih = h - 1 + kh;
                           if (ih < 0 || ih >= H) continue;
                           for (int kw = 0; kw < 3; ++kw) {
                             const int iw = w - 1 + kw;
                             if (iw < 0 || iw >= W) continue;
                             if (xn->requires_grad)
                               xn->grad(off + ih * W + iw) +=
                                   dy * w9[kh * 3 + kw];
                             if (wn->requires_grad)
                               wn->grad(c * 9 + kh * 3 + kw) +=
                                   dy * xn->data(off + ih * W + iw);
                           }
                         }
                       }
                     }
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch_norm2d
// ---------------------------------------------------------------------------

enum class BnMode { kTrain, kEval };

template <typename S>
struct BnState {
  ArrayXT<S> running_mean;
  ArrayXT<S> running_var;
  bool has_stats = false;
};

/// Per-channel batch norm over N·H·W.  Train mode normalizes by biased batch
/// variance and blends unbiased variance into the running stats (momentum
/// semantics as in common frameworks).  Eval mode requires stats to exist.
template <typename S>
TensorT<S> batch_norm2d(const TensorT<S>& x, const TensorT<S>& gamma,
                        const TensorT<S>& beta, BnState<S>& state, BnMode mode,
                        S eps = S(1e-5), S momentum = S(0.1)) {
  const Shape& xs = x.shape();
  const int C = xs.c;
  require(gamma.numel() == C && beta.numel() == C,
          "batch_norm2d: affine parameter size != C");
  require(state.running_mean.size() == C && state.running_var.size() == C,
          "batch_norm2d: state not sized for C");
  const std::int64_t plane = static_cast<std::int64_t>(xs.h) * xs.w;
  const std::int64_t m = static_cast<std::int64_t>(xs.n) * plane;
  if (mode == BnMode::kEval && !state.has_stats)
    throw StateError("batch_norm2d: eval mode before any statistics exist");
  if (mode == BnMode::kTrain)
    require(m > 1, "batch_norm2d: train mode needs >1 value per channel");

  auto xhat = std::make_shared<ArrayXT<S>>(xs.numel());
  auto invstd = std::make_shared<ArrayXT<S>>(C);
  ArrayXT<S> mu(C);

  if (mode == BnMode::kTrain) {
    for (int c = 0; c < C; ++c) {
      S sum = S(0), sq = S(0);
      for (int n = 0; n < xs.n; ++n) {
        const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          const S v = x.data()(off + i);
          sum += v;
          sq += v * v;
        }
      }
      const S mean_c = sum / static_cast<S>(m);
      const S var_c = std::max(sq / static_cast<S>(m) - mean_c * mean_c, S(0));
      mu(c) = mean_c;
      (*invstd)(c) = S(1) / std::sqrt(var_c + eps);
      const S var_unbiased = var_c * static_cast<S>(m) / static_cast<S>(m - 1);
      state.running_mean(c) =
          (S(1) - momentum) * state.running_mean(c) + momentum * mean_c;
      state.running_var(c) =
          (S(1) - momentum) * state.running_var(c) + momentum * var_unbiased;
    }
    state.has_stats = true;
  } else {
    for (int c = 0; c < C; ++c) {
      mu(c) = state.running_mean(c);
      (*invstd)(c) = S(1) / std::sqrt(state.running_var(c) + eps);
    }
  }

  TensorT<S> out(xs);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * plane;
      const S g_c = gamma.data()(c), b_c = beta.data()(c);
      const S mu_c = mu(c), is_c = (*invstd)(c);
      for (std::int64_t i = 0; i < plane; ++i) {
        const S xh = (x.data()(off + i) - mu_c) * is_c;
        (*xhat)(off + i) = xh;
        out.data()(off + i) = g_c * xh + b_c;
      }
    }
  }

  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    const int N = xs.n;
    const bool train = mode == BnMode::kTrain;
    g->record({{xn, gn, bn}, on,
               [xn, gn, bn, on, xhat, invstd, N, C, plane, m, train] {
                 for (int c = 0; c < C; ++c) {
                   S dsum = S(0), dxhsum = S(0);
                   for (int n = 0; n < N; ++n) {
                     const std::int64_t off =
                         (static_cast<std::int64_t>(n) * C + c) * plane;
                     for (std::int64_t i = 0; i < plane; ++i) {
                       const S dy = on->grad(off + i);
                       dsum += dy;
                       dxhsum += dy * (*xhat)(off + i);
                     }
                   }
                   if (gn->requires_grad) gn->grad(c) += dxhsum;
                   if (bn->requires_grad) bn->grad(c) += dsum;
                   if (xn->requires_grad) {
                     const S g_c = gn->data(c), is_c = (*invstd)(c);
                     const S inv_m = S(1) / static_cast<S>(m);
                     for (int n = 0; n < N; ++n) {
                       const std::int64_t off =
                           (static_cast<std::int64_t>(n) * C + c) * plane;
                       for (std::int64_t i = 0; i < plane; ++i) {
                         const S dy = on->grad(off + i);
                         S dx = dy;
                         if (train)
                           dx -= inv_m * (dsum + (*xhat)(off + i) * dxhsum);
                         xn->grad(off + i) += g_c * is_c * dx;
                       }
                     }
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// bilinear_resize, align-corners convention (endpoints map exactly).
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> bilinear_resize(const TensorT<S>& input, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: non-positive target");
  const Shape& xs = input.shape();
  TensorT<S> out(Shape(xs.n, xs.c, out_h, out_w));
  const S sh = out_h == 1 ? S(0)
                          : static_cast<S>(xs.h - 1) / static_cast<S>(out_h - 1);
  const S sw = out_w == 1 ? S(0)
                          : static_cast<S>(xs.w - 1) / static_cast<S>(out_w - 1);
  const std::int64_t iplane = static_cast<std::int64_t>(xs.h) * xs.w;
  const std::int64_t oplane = static_cast<std::int64_t>(out_h) * out_w;
  for (int nc = 0; nc < xs.n * xs.c; ++nc) {
    const S* src = input.data().data() + nc * iplane;
    S* dst = out.data().data() + nc * oplane;
    for (int oh = 0; oh < out_h; ++oh) {
      const S fy = sh * static_cast<S>(oh);
      const int h0 = static_cast<int>(std::floor(fy));
      const int h1 = std::min(h0 + 1, xs.h - 1);
      const S wy = fy - static_cast<S>(h0);
      for (int ow = 0; ow < out_w; ++ow) {
        const S fx = sw * static_cast<S>(ow);
        const int w0 = static_cast<int>(std::floor(fx));
        const int w1 = std::min(w0 + 1, xs.w - 1);
        const S wx = fx - static_cast<S>(w0);
        dst[static_cast<std::int64_t>(oh) * out_w + ow] =
            (S(1) - wy) * ((S(1) - wx) * src[h0 * xs.w + w0] +
                           wx * src[h0 * xs.w + w1]) +
            wy * ((S(1) - wx) * src[h1 * xs.w + w0] +
                  wx * src[h1 * xs.w + w1]);
      }
    }
  }

  auto* g = GraphT<S>::active();
  if (g && input.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = input.node(), on = out.node();
    const int NC = xs.n * xs.c, H = xs.h, W = xs.w;
    g->record({{xn}, on,
               [xn, on, NC, H, W, out_h, out_w, sh, sw, iplane, oplane] {
                 for (int nc = 0; nc < NC; ++nc) {
                   S* dx = xn->grad.data() + nc * iplane;
                   const S* dy = on->grad.data() + nc * oplane;
                   for (int oh = 0; oh < out_h; ++oh) {
                     const S fy = sh * static_cast<S>(oh);
                     const int h0 = static_cast<int>(std::floor(fy));
                     const int h1 = std::min(h0 + 1, H - 1);
                     const S wy = fy - static_cast<S>(h0);
                     for (int ow = 0; ow < out_w; ++ow) {
                       const S fx = sw * static_cast<S>(ow);
                       const int w0 = static_cast<int>(std::floor(fx));
                       const int w1 = std::min(w0 + 1, W - 1);
                       const S wx = fx - static_cast<S>(w0);
                       const S d = dy[static_cast<std::int64_t>(oh) * out_w + ow];
                       dx[h0 * W + w0] += (S(1) - wy) * (S(1) - wx) * d;
                       dx[h0 * W + w1] += (S(1) - wy) * wx * d;
                       dx[h1 * W + w0] += wy * (S(1) - wx) * d;
                       dx[h1 * W + w1] += wy * wx * d;
                     }
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// concat_channels: channel-axis concatenation, input order preserved.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& inputs) {
  require(!inputs.empty(), "concat_channels: no inputs");
  const Shape& s0 = inputs[0].shape();
  int ctotal = 0;
  for (const auto& t : inputs) {
    const Shape& s = t.shape();
    require(s.n == s0.n && s.h == s0.h && s.w == s0.w,
            "concat_channels: spatial/batch mismatch " + s.str() + " vs " +
                s0.str());
    ctotal += s.c;
  }
  TensorT<S> out(Shape(s0.n, ctotal, s0.h, s0.w));
  const std::int64_t plane = static_cast<std::int64_t>(s0.h) * s0.w;
  for (int n = 0; n < s0.n; ++n) {
    std::int64_t coff = 0;
    for (const auto& t : inputs) {
      const std::int64_t blk = static_cast<std::int64_t>(t.shape().c) * plane;
      out.data().segment((static_cast<std::int64_t>(n) * ctotal) * plane +
                             coff * plane,
                         blk) =
          t.data().segment(static_cast<std::int64_t>(n) * blk, blk);
      coff += t.shape().c;
    }
  }

  auto* g = GraphT<S>::active();
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (g && any) {
    out.set_requires_grad(true);
    std::vector<typename GraphT<S>::NodePtr> ins;
    std::vector<int> chans;
    for (const auto& t : inputs) {
      ins.push_back(t.node());
      chans.push_back(t.shape().c);
    }
    auto on = out.node();
    const int N = s0.n;
    auto ins_copy = ins;
    g->record({std::move(ins), on, [ins_copy, chans, on, N, ctotal, plane] {
                 for (int n = 0; n < N; ++n) {
                   std::int64_t coff = 0;
                   for (std::size_t i = 0; i < ins_copy.size(); ++i) {
                     const std::int64_t blk =
                         static_cast<std::int64_t>(chans[i]) * plane;
                     if (ins_copy[i]->requires_grad)
                       ins_copy[i]->grad.segment(
                           static_cast<std::int64_t>(n) * blk, blk) +=
                           on->grad.segment(
                               (static_cast<std::int64_t>(n) * ctotal) * plane +
                                   coff * plane,
                               blk);
                     coff += chans[i];
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// cosine_similarity_channelwise: per-site cosine along C → (N,1,H,W).
// Degenerate sites (either norm < eps) output 0 and propagate no gradient.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> cosine_similarity_channelwise(const TensorT<S>& a,
                                         const TensorT<S>& b,
                                         S eps = S(1e-8)) {
  require(a.shape() == b.shape(), "cosine_similarity: shape mismatch " +
                                      a.shape().str() + " vs " +
                                      b.shape().str());
  const Shape& s = a.shape();
  TensorT<S> out(Shape(s.n, 1, s.h, s.w));
  const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
  const std::int64_t chan_stride = plane;  // step between channels at a site
  for (int n = 0; n < s.n; ++n) {
    const std::int64_t base = static_cast<std::int64_t>(n) * s.c * plane;
    for (std::int64_t p = 0; p < plane; ++p) {
      S dot = S(0), na2 = S(0), nb2 = S(0);
      for (int c = 0; c < s.c; ++c) {
        const S av = a.data()(base + c * chan_stride + p);
        const S bv = b.data()(base + c * chan_stride + p);
        dot += av * bv;
        na2 += av * av;
        nb2 += bv * bv;
      }
      const S na = std::sqrt(na2), nb = std::sqrt(nb2);
      out.data()(static_cast<std::int64_t>(n) * plane + p) =
          (na < eps || nb < eps) ? S(0) : dot / (na * nb);
    }
  }

  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    const int N = s.n, C = s.c;
    g->record({{an, bn}, on, [an, bn, on, N, C, plane, chan_stride, eps] {
                 for (int n = 0; n < N; ++n) {
                   const std::int64_t base =
                       static_cast<std::int64_t>(n) * C * plane;
                   for (std::int64_t p = 0; p < plane; ++p) {
                     const S dy =
                         on->grad(static_cast<std::int64_t>(n) * plane + p);
                     if (dy == S(0)) continue;
                     S dot = S(0), na2 = S(0), nb2 = S(0);
                     for (int c = 0; c < C; ++c) {
                       const S av = an->data(base + c * chan_stride + p);
                       const S bv = bn->data(base + c * chan_stride + p);
                       dot += av * bv;
                       na2 += av * av;
                       nb2 += bv * bv;
                     }
                     const S na = std::sqrt(na2), nb = std::sqrt(nb2);
                     if (na < eps || nb < eps) continue;  // pinned: zero grad
                     const S inv_nanb = S(1) / (na * nb);
                     const S cosv = dot * inv_nanb;
                     for (int c = 0; c < C; ++c) {
                       const S av = an->data(base + c * chan_stride + p);
                       const S bv = bn->data(base + c * chan_stride + p);
                       if (an->requires_grad)
                         an->grad(base + c * chan_stride + p) +=
                             dy * (bv * inv_nanb - cosv * av / na2);
                       if (bn->requires_grad)
                         bn->grad(base + c * chan_stride + p) +=
                             dy * (av * inv_nanb - cosv * bv / nb2);
                     }
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// mul_channel_mask: x (N,C,H,W) ⊙ m (N,1,H,W), mask broadcast over channels.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> mul_channel_mask(const TensorT<S>& x, const TensorT<S>& m) {
  const Shape& xs = x.shape();
  const Shape& ms = m.shape();
  require(ms.n == xs.n && ms.c == 1 && ms.h == xs.h && ms.w == xs.w,
          "mul_channel_mask: mask must be (N,1,H,W) matching " + xs.str() +
              ", got " + ms.str());
  TensorT<S> out(xs);
  const std::int64_t plane = static_cast<std::int64_t>(xs.h) * xs.w;
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      out.data().segment((static_cast<std::int64_t>(n) * xs.c + c) * plane,
                         plane) =
          x.data().segment((static_cast<std::int64_t>(n) * xs.c + c) * plane,
                           plane) *
          m.data().segment(static_cast<std::int64_t>(n) * plane, plane);

  auto* g = GraphT<S>::active();
  if (g && detail::any_grad<S>({&x, &m})) {
    out.set_requires_grad(true);
    auto xn = x.node(), mn = m.node(), on = out.node();
    const int N = xs.n, C = xs.c;
    g->record({{xn, mn}, on, [xn, mn, on, N, C, plane] {
                 for (int n = 0; n < N; ++n) {
                   for (int c = 0; c < C; ++c) {
                     const std::int64_t off =
                         (static_cast<std::int64_t>(n) * C + c) * plane;
                     const std::int64_t moff =
                         static_cast<std::int64_t>(n) * plane;
                     if (xn->requires_grad)
                       xn->grad.segment(off, plane) +=
                           on->grad.segment(off, plane) *
                           mn->data.segment(moff, plane);
                     if (mn->requires_grad)
                       mn->grad.segment(moff, plane) +=
                           on->grad.segment(off, plane) *
                           xn->data.segment(off, plane);
                   }
                 }
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// global_avg_pool: (N,C,H,W) → (N,C,1,1).
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> global_avg_pool(const TensorT<S>& x) {
  const Shape& xs = x.shape();
  TensorT<S> out(Shape(xs.n, xs.c, 1, 1));
  const std::int64_t plane = static_cast<std::int64_t>(xs.h) * xs.w;
  const S inv = S(1) / static_cast<S>(plane);
  for (int nc = 0; nc < xs.n * xs.c; ++nc)
    out.data()(nc) = x.data().segment(nc * plane, plane).sum() * inv;

  auto* g = GraphT<S>::active();
  if (g && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    const int NC = xs.n * xs.c;
    g->record({{xn}, on, [xn, on, NC, plane, inv] {
                 for (int nc = 0; nc < NC; ++nc)
                   xn->grad.segment(nc * plane, plane) += on->grad(nc) * inv;
               }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class Reduction { kMean, kSum };

/// Binary cross entropy over probability maps.  Predictions are clamped to
/// [eps, 1−eps] before the logs; the target carries no gradient.
template <typename S>
TensorT<S> bce_loss(const TensorT<S>& pred, const TensorT<S>& gt,
                    Reduction reduction = Reduction::kMean, S eps = S(1e-7)) {
  require(pred.shape() == gt.shape(), "bce_loss: shape mismatch " +
                                          pred.shape().str() + " vs " +
                                          gt.shape().str());
  const std::int64_t n = pred.numel();
  const S norm = reduction == Reduction::kMean ? S(1) / static_cast<S>(n) : S(1);
  S acc = S(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const S f = std::clamp(pred.data()(i), eps, S(1) - eps);
    const S g = gt.data()(i);
    acc -= g * std::log(f) + (S(1) - g) * std::log(S(1) - f);
  }
  TensorT<S> out(Shape(1, 1, 1, 1));
  out.data()(0) = acc * norm;

  auto* g = GraphT<S>::active();
  if (g && pred.requires_grad()) {
    out.set_requires_grad(true);
    auto pn = pred.node(), gn = gt.node(), on = out.node();
    g->record({{pn, gn}, on, [pn, gn, on, n, norm, eps] {
                 const S dy = on->grad(0) * norm;
                 for (std::int64_t i = 0; i < n; ++i) {
                   const S f = pn->data(i);
                   if (f <= eps || f >= S(1) - eps) continue;  // clamp region
                   pn->grad(i) += dy * (f - gn->data(i)) / (f * (S(1) - f));
                 }
               }});
  }
  return out;
}

/// Mean softmax cross entropy for (N,K,1,1) logits; pretext-task head only.
template <typename S>
TensorT<S> softmax_cross_entropy(const TensorT<S>& logits,
                                 const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  require(s.h == 1 && s.w == 1, "softmax_cross_entropy: logits must be (N,K,1,1)");
  require(static_cast<int>(labels.size()) == s.n,
          "softmax_cross_entropy: label count != batch");
  const int N = s.n, K = s.c;
  S acc = S(0);
  for (int n = 0; n < N; ++n) {
    require(labels[n] >= 0 && labels[n] < K, "softmax_cross_entropy: bad label");
    const S* row = logits.data().data() + static_cast<std::int64_t>(n) * K;
    S mx = row[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    S lse = S(0);
    for (int k = 0; k < K; ++k) lse += std::exp(row[k] - mx);
    lse = mx + std::log(lse);
    acc += lse - row[labels[n]];
  }
  TensorT<S> out(Shape(1, 1, 1, 1));
  out.data()(0) = acc / static_cast<S>(N);

  auto* g = GraphT<S>::active();
  if (g && logits.requires_grad()) {
    out.set_requires_grad(true);
    auto ln = logits.node(), on = out.node();
    g->record({{ln}, on, [ln, on, labels, N, K] {
                 const S dy = on->grad(0) / static_cast<S>(N);
                 for (int n = 0; n < N; ++n) {
                   const S* row = ln->data.data() + static_cast<std::int64_t>(n) * K;
                   S mx = row[0];
                   for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
                   S z = S(0);
                   for (int k = 0; k < K; ++k) z += std::exp(row[k] - mx);
                   for (int k = 0; k < K; ++k) {
                     const S p = std::exp(row[k] - mx) / z;
                     ln->grad(static_cast<std::int64_t>(n) * K + k) +=
                         dy * (p - (k == labels[n] ? S(1) : S(0)));
                   }
                 }
               }});
  }
  return out;
}

}  // namespace paanet

#endif  // PAANET_OPS_HPP
