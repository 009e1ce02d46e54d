// SPDX-License-Identifier: Apache-2.0

#include "paanet/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace paanet {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != v.size())
    throw ArgumentError("config: bad integer for '" + key + "': " + v);
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != v.size() || v.empty() || v[0] == '-')
    throw ArgumentError("config: bad unsigned integer for '" + key + "': " + v);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != v.size())
    throw ArgumentError("config: bad number for '" + key + "': " + v);
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  auto i = [](int RunConfig::*f) {
    return [f](RunConfig& c, const std::string& k, const std::string& v) {
      c.*f = parse_int(k, v);
    };
  };
  auto d = [](double RunConfig::*f) {
    return [f](RunConfig& c, const std::string& k, const std::string& v) {
      c.*f = parse_double(k, v);
    };
  };
  auto s = [](std::string RunConfig::*f) {
    return [f](RunConfig& c, const std::string&, const std::string& v) {
      c.*f = v;
    };
  };
  static const std::map<std::string, Setter> table = {
      {"channels", i(&RunConfig::channels)},
      {"block_depth", i(&RunConfig::block_depth)},
      {"order", i(&RunConfig::order)},
      {"sfe_channels", i(&RunConfig::sfe_channels)},
      {"lr", d(&RunConfig::lr)},
      {"momentum", d(&RunConfig::momentum)},
      {"weight_decay", d(&RunConfig::weight_decay)},
      {"gamma", d(&RunConfig::gamma)},
      {"epochs", i(&RunConfig::epochs)},
      {"lr_step", i(&RunConfig::lr_step)},
      {"reduction", s(&RunConfig::reduction)},
      {"batch_size", i(&RunConfig::batch_size)},
      {"flip_prob", d(&RunConfig::flip_prob)},
      {"image_size", i(&RunConfig::image_size)},
      {"data_dir", s(&RunConfig::data_dir)},
      {"eval_dir", s(&RunConfig::eval_dir)},
      {"strategy", s(&RunConfig::strategy)},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = parse_u64(k, v);
       }},
      {"out_dir", s(&RunConfig::out_dir)},
  };
  return table;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.base_channels = channels;
  m.block_depth = block_depth;
  m.sfe_order = order;
  m.sfe_channels.fill(sfe_channels);
  m.seed = seed;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.opt.lr = lr;
  t.opt.momentum = momentum;
  t.opt.weight_decay = weight_decay;
  t.opt.gamma = gamma;
  t.opt.epochs = epochs;
  t.opt.lr_step = lr_step;
  t.loss.reduction = reduction == "sum" ? Reduction::kSum : Reduction::kMean;
  t.batch_size = batch_size;
  t.strategy = parse_strategy(strategy);
  t.flip_prob = flip_prob;
  t.seed = seed;
  t.config_echo = run_config_text(*this);
  return t;
}

void RunConfig::validate() const {
  require(channels > 0, "config: channels must be positive");
  require(block_depth > 0, "config: block_depth must be positive");
  require(order >= 1, "config: order must be at least 1");
  require(sfe_channels >= 0, "config: sfe_channels must be non-negative");
  require(lr > 0, "config: lr must be positive");
  require(momentum >= 0 && momentum < 1, "config: momentum must be in [0,1)");
  require(weight_decay >= 0, "config: weight_decay must be non-negative");
  require(gamma > 0 && gamma <= 1, "config: gamma must be in (0,1]");
  require(epochs > 0, "config: epochs must be positive");
  require(lr_step > 0, "config: lr_step must be positive");
  require(reduction == "mean" || reduction == "sum",
          "config: reduction must be 'mean' or 'sum'");
  require(batch_size > 0, "config: batch_size must be positive");
  require(flip_prob >= 0 && flip_prob <= 1,
          "config: flip_prob must be in [0,1]");
  require(image_size >= 16 && image_size % 16 == 0,
          "config: image_size must be a positive multiple of 16");
  parse_strategy(strategy);  // throws on anything else
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config line " + std::to_string(lineno) +
                          ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = key_table().find(key);
    if (it == key_table().end())
      throw ArgumentError("config line " + std::to_string(lineno) +
                          ": unknown key '" + key + "'");
    if (seen[key])
      throw ArgumentError("config line " + std::to_string(lineno) +
                          ": repeated key '" + key + "'");
    seen[key] = true;
    it->second(cfg, key, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "channels = " << cfg.channels << "\n"
      << "block_depth = " << cfg.block_depth << "\n"
      << "order = " << cfg.order << "\n"
      << "sfe_channels = " << cfg.sfe_channels << "\n"
      << "lr = " << fmt_double(cfg.lr) << "\n"
      << "momentum = " << fmt_double(cfg.momentum) << "\n"
      << "weight_decay = " << fmt_double(cfg.weight_decay) << "\n"
      << "gamma = " << fmt_double(cfg.gamma) << "\n"
      << "epochs = " << cfg.epochs << "\n"
      << "lr_step = " << cfg.lr_step << "\n"
      << "reduction = " << cfg.reduction << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "flip_prob = " << fmt_double(cfg.flip_prob) << "\n"
      << "image_size = " << cfg.image_size << "\n"
      << "data_dir = " << cfg.data_dir << "\n"
      << "eval_dir = " << cfg.eval_dir << "\n"
      << "strategy = " << cfg.strategy << "\n"
      << "seed = " << cfg.seed << "\n"
      << "out_dir = " << cfg.out_dir << "\n";
  return out.str();
}

}  // namespace paanet
