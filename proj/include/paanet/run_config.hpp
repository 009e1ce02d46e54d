// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "paanet/model.hpp"
#include "paanet/trainer.hpp"

namespace paanet {

/// Everything one run needs, flattened so it can live in a plain
/// `key = value` file.  Every field has a default; unknown keys are
/// rejected so typos fail loudly instead of silently training with a
/// default.
struct RunConfig {
  // model
  int channels = 8;       // backbone width, doubled per level
  int block_depth = 1;    // conv blocks per backbone level
  int order = 3;          // contrast-operator cascade depth
  int sfe_channels = 0;   // saliency feature width, 0 → pyramid width

  // optimizer
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double gamma = 0.1;
  int epochs = 10;
  int lr_step = 8;

  // loss / trainer
  std::string reduction = "mean";  // mean | sum
  int batch_size = 4;
  double flip_prob = 0.5;
  int image_size = 64;

  // run
  std::string data_dir;  // training root (images/ + masks/)
  std::string eval_dir;  // held-out root for eval/ablate
  std::string strategy = "frozen";  // frozen | unfrozen
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  /// Range/enum checks shared by every command; throws ArgumentError.
  void validate() const;
};

/// Parses flat `key = value` text ('#' starts a comment).  Unknown keys,
/// repeated keys, and malformed values are ArgumentErrors.
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::string& path);

/// Lossless round-trip form (doubles at full precision), also used as the
/// checkpoint config echo.
std::string run_config_text(const RunConfig& cfg);

}  // namespace paanet
