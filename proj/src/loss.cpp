// SPDX-License-Identifier: Apache-2.0

#include "paanet/loss.hpp"

namespace paanet {

Tensor total_loss(const std::vector<Tensor>& side_losses,
                  const Tensor& fused_loss, const LossConfig& cfg) {
  require(side_losses.size() == 5, "total_loss: expected 5 side losses, got " +
                                       std::to_string(side_losses.size()));
  Tensor acc = scale(side_losses[0], cfg.side_weights[0]);
  for (int i = 1; i < 5; ++i)
    acc = add(acc, scale(side_losses[i], cfg.side_weights[i]));
  return add(acc, scale(fused_loss, cfg.fused_weight));
}

LossTerms model_loss(const ModelOutputs& out, const Tensor& target,
                     const LossConfig& cfg) {
  LossTerms terms;
  std::vector<Tensor> side;
  side.reserve(5);
  for (int i = 0; i < 5; ++i) {
    terms.side[i] = bce_loss(out.side[i], target, cfg.reduction, cfg.eps);
    side.push_back(terms.side[i]);
  }
  terms.fused = bce_loss(out.fused, target, cfg.reduction, cfg.eps);
  terms.total = total_loss(side, terms.fused, cfg);
  return terms;
}

}  // namespace paanet
