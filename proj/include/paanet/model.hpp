// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_MODEL_HPP
#define PAANET_MODEL_HPP

#include "paanet/aggregation.hpp"
#include "paanet/backbone.hpp"
#include "paanet/feature_preprocess.hpp"
#include "paanet/saliency_features.hpp"

namespace paanet {

struct ModelConfig {
  int base_channels = 8;
  int in_channels = 3;
  int block_depth = 1;
  int sfe_order = 3;
  std::array<int, 5> sfe_channels{0, 0, 0, 0, 0};  // 0 → pyramid channels
  std::uint64_t seed = 0;
};

/// The four-stage pipeline: general features → preprocessed pyramid →
/// contrast saliency features → aggregated maps.
class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& cfg);

  ModelOutputs forward(const Tensor& x, bool training);

  void set_backbone_frozen(bool f) { backbone_.set_frozen(f); }
  bool backbone_frozen() const { return backbone_.frozen(); }

  void visit(StateVisitor& v);

  Backbone& backbone() { return backbone_; }
  FeaturePreprocess& fp() { return fp_; }
  SaliencyFeatureExtractor& sfe() { return sfe_; }
  FeatureAggregation& fa() { return fa_; }
  const ModelConfig& config() const { return cfg_; }

  /// All (name, tensor) parameter pairs in visit order.
  std::vector<std::pair<std::string, Tensor>> parameters();

 private:
  ModelConfig cfg_;
  Backbone backbone_;
  FeaturePreprocess fp_;
  SaliencyFeatureExtractor sfe_;
  FeatureAggregation fa_;
};

}  // namespace paanet

#endif  // PAANET_MODEL_HPP
