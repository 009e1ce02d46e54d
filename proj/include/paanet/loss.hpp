// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "paanet/aggregation.hpp"
#include "paanet/ops.hpp"

namespace paanet {

/// Weights for the six supervision terms: one BCE per side output plus one
/// for the fused map.  All default to 1.
struct LossConfig {
  std::array<double, 5> side_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  double fused_weight = 1.0;
  Reduction reduction = Reduction::kMean;
  double eps = 1e-7;
};

/// Per-term breakdown.  `total` is the weighted sum and stays on the tape,
/// so backward through it trains all six heads at once.
struct LossTerms {
  Tensor total;
  std::array<Tensor, 5> side;
  Tensor fused;
};

/// L = sum_i W_s^i * l_s^i + W_f * l_f.  Exactly five side losses.
Tensor total_loss(const std::vector<Tensor>& side_losses,
                  const Tensor& fused_loss, const LossConfig& cfg = {});

/// BCE against `target` for each of the six output maps, then the weighted
/// total.  `target` must match the full output resolution.
LossTerms model_loss(const ModelOutputs& out, const Tensor& target,
                     const LossConfig& cfg = {});

}  // namespace paanet
