// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_GRADCHECK_HPP
#define PAANET_GRADCHECK_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "paanet/ops.hpp"
#include "paanet/tensor.hpp"
#include "paanet/types.hpp"

namespace paanet {

template <typename S>
struct GradCheckReport {
  S max_rel_err = S(0);
  std::int64_t checked = 0;
  std::int64_t failed = 0;
  S tol = S(0);
  std::string worst;

  bool pass() const { return failed == 0 && checked > 0; }
};

/// Central-difference oracle: (f(θ+h·e) − f(θ−h·e)) / 2h versus the tape
/// gradient, relative error |g−g_fd| / max(|g|,|g_fd|,1e-12).
///
/// `f` must return a scalar tensor and, for its *value*, be a pure function
/// of the probed parameters (running-stat side effects are fine, the value
/// must not depend on them within one call).  Probes run without recording;
/// parameter bytes are restored exactly after each probe.  Entries with
/// learn_mask == 0 and tensors with requires_grad == false are skipped:
/// their tape gradient is zero by contract even where FD is not.
///
/// `max_entries_per_param` < 0 checks every entry; otherwise entries are
/// taken on an even stride so runs stay reproducible without an RNG.
///
/// `atol` accepts an entry outright when |g − g_fd| ≤ atol.  A genuinely
/// zero gradient (dead PReLU branch, saturated sigmoid) meets FD
/// cancellation noise of order eps·|f|/h, which the relative test scores
/// as 1; the absolute floor covers exactly that case.
template <typename S>
GradCheckReport<S> finite_difference_check(
    const std::function<TensorT<S>()>& f, std::vector<TensorT<S>> params,
    S h = S(1e-5), S tol = S(1e-4), std::int64_t max_entries_per_param = -1,
    S atol = S(0)) {
  GradCheckReport<S> report;
  report.tol = tol;

  // Analytic pass.
  std::vector<ArrayXT<S>> grads(params.size());
  {
    GraphT<S> graph;
    typename GraphT<S>::Scope scope(graph);
    TensorT<S> loss = f();
    graph.backward(loss);
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto& g = params[p].grad();
      grads[p] = g.size() ? g : ArrayXT<S>::Zero(params[p].numel());
    }
  }

  NoGradScopeT<S> nograd;
  for (std::size_t p = 0; p < params.size(); ++p) {
    TensorT<S>& theta = params[p];
    if (!theta.requires_grad()) continue;
    const auto& mask = theta.learn_mask();
    const std::int64_t n = theta.numel();
    std::int64_t count = max_entries_per_param < 0
                             ? n
                             : std::min<std::int64_t>(n, max_entries_per_param);
    for (std::int64_t j = 0; j < count; ++j) {
      const std::int64_t i = count == n ? j : j * n / count;
      if (mask && (*mask)(i) == S(0)) continue;
      const S saved = theta.data()(i);
      theta.data()(i) = saved + h;
      const S fp = f().scalar();
      theta.data()(i) = saved - h;
      const S fm = f().scalar();
      theta.data()(i) = saved;
      const S fd = (fp - fm) / (S(2) * h);
      const S g = grads[p](i);
      ++report.checked;
      if (std::abs(g - fd) <= atol) continue;
      const S denom = std::max({std::abs(g), std::abs(fd), S(1e-12)});
      const S rel = std::abs(g - fd) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = "param " + std::to_string(p) + " entry " +
                       std::to_string(i) + ": grad=" + std::to_string(g) +
                       " fd=" + std::to_string(fd);
      }
      if (rel > tol) ++report.failed;
    }
  }
  return report;
}

}  // namespace paanet

#endif  // PAANET_GRADCHECK_HPP
