// SPDX-License-Identifier: Apache-2.0

#include "paanet/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace paanet {

Strategy parse_strategy(const std::string& s) {
  if (s == "frozen") return Strategy::kFrozen;
  if (s == "unfrozen") return Strategy::kUnfrozen;
  throw ArgumentError("strategy must be 'frozen' or 'unfrozen', got '" + s +
                      "'");
}

std::string strategy_name(Strategy s) {
  return s == Strategy::kFrozen ? "frozen" : "unfrozen";
}

namespace {

std::vector<std::pair<std::string, Tensor>> trainable_params(Model& model) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& [name, t] : model.parameters())
    if (t.requires_grad()) out.emplace_back(name, t);
  return out;
}

}  // namespace

Trainer::Trainer(Model& model, const Dataset& data, const TrainConfig& cfg)
    : model_(model), data_(data), cfg_(cfg),
      sgd_(cfg.opt.lr, cfg.opt.momentum, cfg.opt.weight_decay),
      rng_(cfg.seed) {
  require(!data_.empty(), "train: empty dataset");
  require(cfg_.batch_size > 0, "train: batch_size must be positive");
  require(cfg_.opt.epochs > 0, "train: epochs must be positive");
  const Shape& is = data_[0].image.shape();
  for (const Sample& s : data_) {
    require(s.image.shape() == is, "train: mixed image shapes in dataset");
    require(s.mask.shape() == Shape(1, 1, is.h, is.w),
            "train: mask shape does not match images");
  }
  model_.set_backbone_frozen(cfg_.strategy == Strategy::kFrozen);
  opt_params_ = trainable_params(model_);
  require(!opt_params_.empty(), "train: no trainable parameters");
}

double Trainer::lr_for_epoch(int epoch) const {
  return cfg_.opt.lr * (epoch >= cfg_.opt.lr_step ? cfg_.opt.gamma : 1.0);
}

std::string Trainer::csv_header() {
  return "epoch,step,loss_total,loss_side1,loss_side2,loss_side3,"
         "loss_side4,loss_side5,loss_fused,lr";
}

std::string Trainer::format_row(const StepLog& r) {
  char buf[360];
  std::snprintf(buf, sizeof buf,
                "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                r.epoch, r.step, r.total, r.side[0], r.side[1], r.side[2],
                r.side[3], r.side[4], r.fused, r.lr);
  return buf;
}

TrainResult Trainer::train() { return run(1); }

TrainResult Trainer::resume(const std::string& checkpoint_path) {
  CheckpointMeta meta =
      load_checkpoint(checkpoint_path, model_, &sgd_, opt_params_, &rng_);
  // The checkpoint's frozen flags just overwrote the strategy applied at
  // construction; a disagreement would silently train the wrong subset.
  auto now = trainable_params(model_);
  bool same = now.size() == opt_params_.size();
  for (std::size_t i = 0; same && i < now.size(); ++i)
    same = now[i].first == opt_params_[i].first;
  if (!same)
    throw StateError("resume: checkpoint strategy does not match config");
  return run(static_cast<int>(meta.epoch) + 1);
}

TrainResult Trainer::run(int first_epoch) {
  const int n = static_cast<int>(data_.size());
  const int bs = cfg_.batch_size;
  const int steps_per_epoch = (n + bs - 1) / bs;
  const Shape& is = data_[0].image.shape();

  TrainResult res;
  res.first_epoch = first_epoch;

  for (int epoch = first_epoch; epoch <= cfg_.opt.epochs; ++epoch) {
    const double lr = lr_for_epoch(epoch);
    sgd_.set_lr(lr);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng_.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }

    double epoch_sum = 0;
    for (int b = 0; b < steps_per_epoch; ++b) {
      const int lo = b * bs;
      const int hi = std::min(n, lo + bs);
      const int cnt = hi - lo;
      Tensor x(Shape(cnt, is.c, is.h, is.w));
      Tensor y(Shape(cnt, 1, is.h, is.w));
      for (int k = 0; k < cnt; ++k) {
        const Sample& s = data_[order[lo + k]];
        const bool flip = rng_.uniform() < cfg_.flip_prob;
        const Tensor& img = flip ? hflip(s.image) : s.image;
        const Tensor& msk = flip ? hflip(s.mask) : s.mask;
        for (std::int64_t c = 0; c < is.c; ++c)
          for (std::int64_t hh = 0; hh < is.h; ++hh)
            for (std::int64_t ww = 0; ww < is.w; ++ww)
              x.at(k, c, hh, ww) = img.at(0, c, hh, ww);
        for (std::int64_t hh = 0; hh < is.h; ++hh)
          for (std::int64_t ww = 0; ww < is.w; ++ww)
            y.at(k, 0, hh, ww) = msk.at(0, 0, hh, ww);
      }

      LossTerms terms;
      Graph graph;
      {
        Graph::Scope scope(graph);
        ModelOutputs out = model_.forward(x, /*training=*/true);
        terms = model_loss(out, y, cfg_.loss);
        graph.backward(terms.total);
      }
      sgd_.step(opt_params_);

      StepLog row;
      row.epoch = epoch;
      row.step = (epoch - 1) * steps_per_epoch + b + 1;
      row.total = terms.total.scalar();
      for (int i = 0; i < 5; ++i) row.side[i] = terms.side[i].scalar();
      row.fused = terms.fused.scalar();
      row.lr = lr;
      epoch_sum += row.total;
      res.steps.push_back(row);
    }
    res.epoch_mean.push_back(epoch_sum / steps_per_epoch);

    if (!cfg_.checkpoint_dir.empty()) {
      std::filesystem::create_directories(cfg_.checkpoint_dir);
      CheckpointMeta meta;
      meta.epoch = static_cast<std::uint64_t>(epoch);
      meta.config_echo = cfg_.config_echo;
      save_checkpoint(cfg_.checkpoint_dir + "/ckpt_epoch_" +
                          std::to_string(epoch) + ".paan",
                      model_, &sgd_, opt_params_, meta, &rng_);
    }
  }

  if (!cfg_.log_path.empty()) {
    std::ofstream f(cfg_.log_path, std::ios::trunc);
    if (!f) throw IoError("train: cannot open log " + cfg_.log_path);
    f << csv_header() << "\n";
    for (const StepLog& r : res.steps) f << format_row(r) << "\n";
  }
  return res;
}

}  // namespace paanet
