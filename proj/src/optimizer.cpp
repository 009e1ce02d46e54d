// SPDX-License-Identifier: Apache-2.0

#include "paanet/optimizer.hpp"

namespace paanet {

void Sgd::step(std::vector<std::pair<std::string, Tensor>>& params) {
  for (auto& [name, p] : params) {
    if (!p.requires_grad()) continue;  // frozen: not even touched
    if (p.grad().size() == 0)
      throw StateError("sgd_step: no gradient for " + name +
                       " (step before backward?)");
    auto& v = velocity_[p.node().get()];
    if (v.size() == 0) v.setZero(p.numel());
    v = momentum_ * v + (p.grad() + weight_decay_ * p.data());
    if (p.learn_mask()) v *= *p.learn_mask();
    p.data() -= lr_ * v;
  }
}

ArrayXT<Scalar>* Sgd::velocity(const Tensor& param) {
  auto it = velocity_.find(param.node().get());
  return it == velocity_.end() ? nullptr : &it->second;
}

const ArrayXT<Scalar>* Sgd::velocity(const Tensor& param) const {
  auto it = velocity_.find(param.node().get());
  return it == velocity_.end() ? nullptr : &it->second;
}

void Sgd::set_velocity(const Tensor& param, const ArrayXT<Scalar>& v) {
  velocity_[param.node().get()] = v;
}

}  // namespace paanet
