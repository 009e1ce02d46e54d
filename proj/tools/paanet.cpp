// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train, eval, predict, ablate, synth.  Every
// command is deterministic given (config, seed, inputs) and exits 0 only
// when all requested outputs were written.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "paanet/checkpoint.hpp"
#include "paanet/dataset.hpp"
#include "paanet/image_io.hpp"
#include "paanet/metrics.hpp"
#include "paanet/model.hpp"
#include "paanet/run_config.hpp"
#include "paanet/synth.hpp"
#include "paanet/trainer.hpp"

namespace fs = std::filesystem;
using namespace paanet;

namespace {

// A flag counts as an override only when the user actually passed it.
struct Overrides {
  CLI::App* cmd = nullptr;
  std::string config_path, data_dir, eval_dir, strategy, out_dir;
  std::uint64_t seed = 0;
  int order = 0, epochs = 0, image_size = 0;

  void attach(CLI::App* app, bool with_strategy) {
    cmd = app;
    app->add_option("--config", config_path, "key = value config file");
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--data", data_dir, "training data root (images/+masks/)");
    app->add_option("--eval-data", eval_dir, "held-out data root");
    app->add_option("--out", out_dir, "output directory");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--image-size", image_size, "square working resolution");
    if (with_strategy)
      app->add_option("--strategy", strategy, "frozen | unfrozen backbone");
    app->add_option("--order", order, "contrast-operator cascade depth");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (cmd->count("--seed")) cfg.seed = seed;
    if (cmd->count("--data")) cfg.data_dir = data_dir;
    if (cmd->count("--eval-data")) cfg.eval_dir = eval_dir;
    if (cmd->count("--out")) cfg.out_dir = out_dir;
    if (cmd->count("--epochs")) cfg.epochs = epochs;
    if (cmd->count("--image-size")) cfg.image_size = image_size;
    if (cmd->count("--order")) cfg.order = order;
    if (!strategy.empty()) cfg.strategy = strategy;
    cfg.validate();
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

/// Trains one model on `data` and leaves model.ckpt, train_log.csv,
/// config.cfg, and the per-epoch checkpoints under `out`.
Model train_into(const RunConfig& cfg, const Dataset& data,
                 const fs::path& out) {
  fs::create_directories(out);
  Model model(cfg.model_config());
  TrainConfig tc = cfg.train_config();
  tc.log_path = (out / "train_log.csv").string();
  tc.checkpoint_dir = out.string();
  Trainer trainer(model, data, tc);
  TrainResult res = trainer.train();
  save_checkpoint((out / "model.ckpt").string(), model, &trainer.optimizer(),
                  trainer.opt_params(),
                  {static_cast<std::uint64_t>(cfg.epochs), tc.config_echo},
                  &trainer.rng());
  write_text(out / "config.cfg", run_config_text(cfg));
  std::printf("trained %d epochs, %zu steps, final epoch mean loss %.6f\n",
              cfg.epochs, res.steps.size(), res.epoch_mean.back());
  return model;
}

int cmd_train(const Overrides& ov) {
  RunConfig cfg = ov.resolve();
  require(!cfg.data_dir.empty(), "train: data_dir is required");
  Dataset data = load_dataset(cfg.data_dir, cfg.image_size, cfg.image_size);
  train_into(cfg, data, cfg.out_dir);
  return 0;
}

/// Rebuilds the architecture recorded in a checkpoint's config echo and
/// loads the weights into it.
std::pair<Model, RunConfig> model_from_checkpoint(const std::string& path) {
  CheckpointReader reader = CheckpointReader::from_file(path);
  RunConfig cfg = parse_run_config(reader.str("meta.config"));
  Model model(cfg.model_config());
  load_checkpoint(path, model, nullptr, {}, nullptr);
  return {std::move(model), cfg};
}

Tensor predict_one(Model& model, const Tensor& image) {
  NoGradScope no_grad;
  return model.forward(image, false).fused;
}

int cmd_eval(const Overrides& ov, const std::string& pred_dir,
             const std::string& gt_dir, const std::string& ckpt) {
  require(pred_dir.empty() != ckpt.empty(),
          "eval: pass exactly one of --pred or --checkpoint");
  RunConfig cfg = ov.resolve();
  const fs::path out = cfg.out_dir;

  if (!pred_dir.empty()) {
    require(!gt_dir.empty(), "eval: --gt is required with --pred");
    MetricReport rep = evaluate_dataset(pred_dir, gt_dir, out.string());
    std::printf("mae %.6f  max_fm %.6f  s %.6f  auc %.6f\n", rep.mae,
                rep.max_fm, rep.sm, rep.auc);
    return 0;
  }

  auto [model, ckpt_cfg] = model_from_checkpoint(ckpt);
  const std::string root = !cfg.eval_dir.empty() ? cfg.eval_dir : cfg.data_dir;
  require(!root.empty(), "eval: --eval-data (or data_dir) is required");
  const int size = ov.cmd->count("--image-size") ? cfg.image_size
                                                 : ckpt_cfg.image_size;
  Dataset data = load_dataset(root, size, size);
  require(!data.empty(), "eval: no image/mask pairs under " + root);

  fs::create_directories(out / "pred");
  PairSet pairs;
  for (const Sample& s : data) {
    Tensor fused = predict_one(model, s.image);
    write_png((out / "pred" / (s.name + ".png")).string(),
              tensor_to_gray_u8(fused));
    pairs.emplace_back(std::move(fused), s.mask);
  }
  MetricReport rep = evaluate_pairs(pairs);
  write_report(rep, out.string());
  std::printf("mae %.6f  max_fm %.6f  s %.6f  auc %.6f\n", rep.mae, rep.max_fm,
              rep.sm, rep.auc);
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& image_dir,
                const Overrides& ov) {
  RunConfig cfg = ov.resolve();
  auto [model, ckpt_cfg] = model_from_checkpoint(ckpt);
  const int size = ov.cmd->count("--image-size") ? cfg.image_size
                                                 : ckpt_cfg.image_size;
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(image_dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      inputs.push_back(e.path());
  }
  std::sort(inputs.begin(), inputs.end());
  require(!inputs.empty(), "predict: no images under " + image_dir);

  fs::create_directories(cfg.out_dir);
  int failures = 0;
  for (const fs::path& p : inputs) {
    try {
      Tensor image = preprocess_image(p.string(), size, size);
      const fs::path dst =
          fs::path(cfg.out_dir) / (p.stem().string() + ".png");
      write_png(dst.string(), tensor_to_gray_u8(predict_one(model, image)));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "predict: %s: %s\n", p.c_str(), e.what());
      ++failures;
    }
  }
  std::printf("wrote %zu saliency maps to %s\n", inputs.size() - failures,
              cfg.out_dir.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_ablate(const Overrides& ov, std::vector<int> orders) {
  require(!orders.empty(), "ablate: --orders is required");
  for (std::size_t i = 0; i < orders.size(); ++i)
    for (std::size_t j = i + 1; j < orders.size(); ++j)
      require(orders[i] != orders[j], "ablate: duplicate order " +
                                          std::to_string(orders[i]));
  RunConfig cfg = ov.resolve();
  require(!cfg.data_dir.empty(), "ablate: data_dir is required");
  require(!cfg.eval_dir.empty(), "ablate: eval_dir is required");
  Dataset train_set =
      load_dataset(cfg.data_dir, cfg.image_size, cfg.image_size);
  Dataset test_set =
      load_dataset(cfg.eval_dir, cfg.image_size, cfg.image_size);
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);

  std::ofstream table(out / "ablation.csv");
  if (!table) throw IoError("cannot write " + (out / "ablation.csv").string());
  table << "order,MAE,MaxFm,MeanFm,MaxEm,MeanEm,Sm\n";
  int failures = 0;
  for (int order : orders) {
    RunConfig run = cfg;
    run.order = order;
    try {
      Model model =
          train_into(run, train_set, out / ("order_" + std::to_string(order)));
      PairSet pairs;
      for (const Sample& s : test_set)
        pairs.emplace_back(predict_one(model, s.image), s.mask);
      MetricReport rep = evaluate_pairs(pairs);
      char row[256];
      std::snprintf(row, sizeof row, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    order, rep.mae, rep.max_fm, rep.mean_fm, rep.max_em,
                    rep.mean_em, rep.sm);
      table << row << std::flush;
      std::printf("order %d: mae %.6f  max_fm %.6f  s %.6f\n", order, rep.mae,
                  rep.max_fm, rep.sm);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "ablate: order %d failed: %s\n", order, e.what());
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_synth(const Overrides& ov, SynthConfig scfg, bool challenge) {
  RunConfig cfg = ov.resolve();
  if (challenge) {
    SynthConfig hard = SynthConfig::challenge();
    hard.count = scfg.count;
    hard.size = scfg.size;
    scfg = hard;
  }
  if (ov.cmd->count("--seed")) scfg.seed = cfg.seed;
  if (ov.cmd->count("--image-size")) scfg.size = cfg.image_size;
  synth_generate(cfg.out_dir, scfg);
  std::printf("wrote %d image/mask pairs under %s\n", scfg.count,
              cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"four-stage salient object detection pipeline"};
  app.require_subcommand(1);

  Overrides train_ov, eval_ov, predict_ov, ablate_ov, synth_ov;
  train_ov.attach(app.add_subcommand("train", "train a model"), true);

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate predictions or a checkpoint");
  std::string eval_pred, eval_gt, eval_ckpt;
  eval_cmd->add_option("--pred", eval_pred, "directory of prediction maps");
  eval_cmd->add_option("--gt", eval_gt, "directory of ground-truth masks");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "trained model checkpoint");
  eval_ov.attach(eval_cmd, false);

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "export saliency maps for a directory");
  std::string pred_ckpt, pred_images;
  predict_cmd->add_option("--checkpoint", pred_ckpt, "trained model checkpoint")
      ->required();
  predict_cmd->add_option("--images", pred_images, "input image directory")
      ->required();
  predict_ov.attach(predict_cmd, false);

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "train and evaluate one model per order");
  std::vector<int> orders;
  ablate_cmd->add_option("--orders", orders, "cascade depths, e.g. 1,2,3")
      ->delimiter(',');
  ablate_ov.attach(ablate_cmd, true);

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic dataset");
  SynthConfig scfg;
  bool challenge = false;
  synth_cmd->add_option("--count", scfg.count, "number of samples");
  synth_cmd->add_option("--size", scfg.size, "image side length");
  synth_cmd->add_option("--contrast-lo", scfg.contrast_lo, "min offset");
  synth_cmd->add_option("--contrast-hi", scfg.contrast_hi, "max offset");
  synth_cmd->add_option("--noise", scfg.noise, "per-pixel noise amplitude");
  synth_cmd->add_flag("--challenge", challenge,
                      "low-contrast cluttered preset");
  synth_ov.attach(synth_cmd, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("train")) return cmd_train(train_ov);
    if (app.got_subcommand("eval"))
      return cmd_eval(eval_ov, eval_pred, eval_gt, eval_ckpt);
    if (app.got_subcommand("predict"))
      return cmd_predict(pred_ckpt, pred_images, predict_ov);
    if (app.got_subcommand("ablate")) return cmd_ablate(ablate_ov, orders);
    if (app.got_subcommand("synth"))
      return cmd_synth(synth_ov, scfg, challenge);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
