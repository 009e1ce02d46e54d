// SPDX-License-Identifier: Apache-2.0

#include "paanet/model.hpp"

namespace paanet {

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  BackboneConfig bc;
  bc.base_channels = cfg.base_channels;
  bc.in_channels = cfg.in_channels;
  bc.block_depth = cfg.block_depth;
  bc.seed = cfg.seed;
  backbone_ = Backbone(bc);

  std::array<int, 5> ch;
  for (int i = 0; i < 5; ++i) ch[i] = backbone_.level_channels(i + 1);

  // one stream for the remaining stages keeps init deterministic in seed
  Rng rng(cfg.seed ^ 0xa5a5a5a5deadbeefULL);
  fp_ = FeaturePreprocess(ch, rng);

  SFEConfig sc;
  sc.order = cfg.sfe_order;
  sc.channels = cfg.sfe_channels;
  sfe_ = SaliencyFeatureExtractor(sc, ch, rng);

  fa_ = FeatureAggregation(sfe_.config().channels, rng);
}

ModelOutputs Model::forward(const Tensor& x, bool training) {
  FeaturePyramid f_gen = backbone_.forward(x, training);
  FeaturePyramid f_pre = fp_.forward(f_gen, training);
  FeaturePyramid f_sal = sfe_.forward(f_pre);
  return fa_.forward(f_sal, training);
}

void Model::visit(StateVisitor& v) {
  backbone_.visit("backbone", v);
  fp_.visit("fp", v);
  sfe_.visit("sfe", v);
  fa_.visit("fa", v);
}

std::vector<std::pair<std::string, Tensor>> Model::parameters() {
  ParamCollector pc;
  visit(pc);
  return std::move(pc.params);
}

}  // namespace paanet
