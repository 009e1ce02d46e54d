// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "paanet/checkpoint.hpp"
#include "paanet/dataset.hpp"
#include "paanet/loss.hpp"
#include "paanet/model.hpp"
#include "paanet/optimizer.hpp"

namespace paanet {

/// Frozen keeps the backbone fixed (and its batch norms in eval mode);
/// unfrozen trains all four stages end to end.
enum class Strategy { kFrozen, kUnfrozen };

Strategy parse_strategy(const std::string& s);
std::string strategy_name(Strategy s);

struct TrainConfig {
  OptimizerConfig opt;
  LossConfig loss;
  int batch_size = 4;
  Strategy strategy = Strategy::kFrozen;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;
  std::string log_path;        // CSV written here when set
  std::string checkpoint_dir;  // per-epoch checkpoints written when set
  std::string config_echo;     // stored verbatim in checkpoints
};

struct StepLog {
  int epoch;
  int step;  // global, 1-based, continuous across epochs
  double total;
  std::array<double, 5> side;
  double fused;
  double lr;
};

struct TrainResult {
  int first_epoch = 1;  // epoch of the first row (resume starts later)
  std::vector<StepLog> steps;
  std::vector<double> epoch_mean;  // mean total loss per epoch covered
};

/// Runs the training loop: seeded shuffle + flip augmentation, batched
/// forward/backward over the tape, SGD step, per-step CSV logging, and an
/// epoch-boundary checkpoint.  All randomness comes from one serialized
/// RNG stream, so a checkpoint resume replays the exact run.
class Trainer {
 public:
  Trainer(Model& model, const Dataset& data, const TrainConfig& cfg);

  /// Epochs 1..opt.epochs.
  TrainResult train();
  /// Restores model/optimizer/RNG from the checkpoint and continues with
  /// the epoch after the stored one.
  TrainResult resume(const std::string& checkpoint_path);

  static std::string csv_header();
  /// One CSV row, loss and lr columns at %.17g so logs compare bit-exactly.
  static std::string format_row(const StepLog& row);

  std::vector<std::pair<std::string, Tensor>>& opt_params() {
    return opt_params_;
  }
  Sgd& optimizer() { return sgd_; }
  Rng& rng() { return rng_; }

 private:
  TrainResult run(int first_epoch);
  double lr_for_epoch(int epoch) const;

  Model& model_;
  const Dataset& data_;
  TrainConfig cfg_;
  Sgd sgd_;
  Rng rng_;
  std::vector<std::pair<std::string, Tensor>> opt_params_;
};

}  // namespace paanet
