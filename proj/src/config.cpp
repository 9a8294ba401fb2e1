// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace adfa {

namespace {

[[noreturn]] void bad_key(const std::string& path) {
  throw ConfigError("unknown config key '" + path + "'");
}

void check_keys(const YAML::Node& node, const std::string& prefix,
                const std::set<std::string>& allowed) {
  if (!node || !node.IsMap()) return;
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) bad_key(prefix.empty() ? key : prefix + "." + key);
  }
}

template <typename T>
T get_or(const YAML::Node& node, const char* key, T fallback) {
  if (!node || !node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::vector<int> int_list(const YAML::Node& node, const char* key, std::vector<int> fallback) {
  if (!node || !node[key]) return fallback;
  try {
    return node[key].as<std::vector<int>>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("config key '") + key + "' must be a list of integers");
  }
}

void apply_override(YAML::Node root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ArgumentError("override must look like section.key=value: '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ArgumentError("override path has an empty segment: '" + path + "'");
    parts.push_back(part);
  }

  // Node::operator= writes through to the document, so the descent must
  // only ever copy-construct handles.
  std::function<void(YAML::Node, size_t)> descend = [&](YAML::Node node, size_t i) {
    if (i + 1 == parts.size()) {
      node[parts[i]] = YAML::Load(value);
      return;
    }
    YAML::Node child = node[parts[i]];
    if (!child || child.IsNull())
      node[parts[i]] = YAML::Node(YAML::NodeType::Map);
    else if (!child.IsMap())
      throw ArgumentError("override path '" + path + "' descends through a non-map key");
    descend(node[parts[i]], i + 1);
  };
  descend(root, 0);
}

AnchorMode parse_anchor_mode(const std::string& s) {
  if (s == "min_max_of_input") return AnchorMode::min_max_of_input;
  if (s == "fixed_unit") return AnchorMode::fixed_unit;
  throw ConfigError("soft_topk.anchor_mode must be min_max_of_input or fixed_unit, got '" + s +
                    "'");
}

BackwardMode parse_backward_mode(const std::string& s) {
  if (s == "unrolled") return BackwardMode::unrolled;
  if (s == "implicit") return BackwardMode::implicit;
  throw ConfigError("soft_topk.backward_mode must be unrolled or implicit, got '" + s + "'");
}

CenterRefresh parse_refresh(const std::string& s) {
  if (s == "fixed_after_init") return CenterRefresh::fixed_after_init;
  if (s == "per_epoch") return CenterRefresh::per_epoch;
  throw ConfigError("train.center_refresh must be fixed_after_init or per_epoch, got '" + s + "'");
}

ResizeFilter parse_filter(const std::string& s) {
  if (s == "bilinear") return ResizeFilter::bilinear;
  if (s == "bicubic") return ResizeFilter::bicubic;
  throw ConfigError("backbone.resize_filter must be bilinear or bicubic, got '" + s + "'");
}

std::array<double, 3> triple(const YAML::Node& node, const char* key,
                             std::array<double, 3> fallback) {
  if (!node || !node[key]) return fallback;
  const auto v = node[key].as<std::vector<double>>();
  if (v.size() != 3)
    throw ConfigError(std::string("config key '") + key + "' must have exactly 3 entries");
  return {v[0], v[1], v[2]};
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text,
                           const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (root && !root.IsMap() && !root.IsNull())
    throw ConfigError("config root must be a mapping");
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& ov : overrides) apply_override(root, ov);

  check_keys(root, "", {"backbone", "descriptor", "soft_topk", "train", "eval", "paths"});
  const YAML::Node backbone = root["backbone"];
  const YAML::Node descriptor = root["descriptor"];
  const YAML::Node topk = root["soft_topk"];
  const YAML::Node train = root["train"];
  const YAML::Node eval = root["eval"];
  const YAML::Node paths = root["paths"];
  check_keys(backbone, "backbone",
             {"source", "weights_path", "tap_names", "tap_channels", "tap_divisors", "seed",
              "stem_channels", "resize_edge", "crop_size", "channel_mean", "channel_std",
              "resize_filter"});
  check_keys(descriptor, "descriptor", {"d_prime", "epsilon", "seed", "gamma", "b"});
  check_keys(topk, "soft_topk",
             {"k", "ot_epsilon", "max_iters", "tolerance", "anchor_mode", "cost_power",
              "backward_mode"});
  check_keys(train, "train",
             {"learning_rate", "weight_decay", "epochs", "batch_size", "seed", "center_refresh",
              "hard_selection"});
  check_keys(eval, "eval", {"report_out", "roc_out"});
  check_keys(paths, "paths",
             {"dataset_root", "checkpoint_out", "train_log_out", "ablation_table_out",
              "ablation_csv_out"});

  RunConfig cfg;

  cfg.backbone.source = get_or<std::string>(backbone, "source", cfg.backbone.source);
  if (cfg.backbone.source != "pretrained" && cfg.backbone.source != "random_seeded")
    throw ConfigError("backbone.source must be pretrained or random_seeded, got '" +
                      cfg.backbone.source + "'");
  cfg.backbone.weights_path =
      get_or<std::string>(backbone, "weights_path", cfg.backbone.weights_path);
  if (backbone && backbone["tap_names"])
    cfg.backbone.tap_names = backbone["tap_names"].as<std::vector<std::string>>();
  cfg.backbone.tap_channels = int_list(backbone, "tap_channels", cfg.backbone.tap_channels);
  cfg.backbone.tap_divisors = int_list(backbone, "tap_divisors", cfg.backbone.tap_divisors);
  cfg.backbone.seed = get_or<std::uint64_t>(backbone, "seed", cfg.backbone.seed);
  cfg.backbone.stem_channels = get_or<int>(backbone, "stem_channels", cfg.backbone.stem_channels);
  cfg.backbone.preprocess.resize_edge =
      get_or<int>(backbone, "resize_edge", cfg.backbone.preprocess.resize_edge);
  cfg.backbone.preprocess.crop_size =
      get_or<int>(backbone, "crop_size", cfg.backbone.preprocess.crop_size);
  cfg.backbone.preprocess.channel_mean =
      triple(backbone, "channel_mean", cfg.backbone.preprocess.channel_mean);
  cfg.backbone.preprocess.channel_std =
      triple(backbone, "channel_std", cfg.backbone.preprocess.channel_std);
  cfg.backbone.preprocess.resize_filter =
      parse_filter(get_or<std::string>(backbone, "resize_filter", "bilinear"));

  cfg.descriptor.d_prime = get_or<int>(descriptor, "d_prime", cfg.descriptor.d_prime);
  cfg.descriptor.epsilon = get_or<double>(descriptor, "epsilon", cfg.descriptor.epsilon);
  cfg.descriptor.seed = get_or<std::uint64_t>(descriptor, "seed", cfg.descriptor.seed);
  cfg.descriptor.gamma = get_or<int>(descriptor, "gamma", cfg.descriptor.gamma);
  cfg.descriptor.b = get_or<int>(descriptor, "b", cfg.descriptor.b);
  if (cfg.descriptor.d_prime < 1) throw ConfigError("descriptor.d_prime must be positive");
  if (cfg.descriptor.epsilon < 0.0) throw ConfigError("descriptor.epsilon must be nonnegative");

  SoftTopKConfig& sk = cfg.train.topk;
  sk.k = get_or<int>(topk, "k", sk.k);
  sk.ot_epsilon = get_or<double>(topk, "ot_epsilon", sk.ot_epsilon);
  sk.max_iters = get_or<int>(topk, "max_iters", sk.max_iters);
  sk.tolerance = get_or<double>(topk, "tolerance", sk.tolerance);
  sk.anchor_mode = parse_anchor_mode(get_or<std::string>(topk, "anchor_mode", "min_max_of_input"));
  sk.cost_power = get_or<int>(topk, "cost_power", sk.cost_power);
  sk.backward_mode = parse_backward_mode(get_or<std::string>(topk, "backward_mode", "unrolled"));
  if (sk.k < 1) throw ConfigError("soft_topk.k must be at least 1");
  if (sk.ot_epsilon <= 0.0) throw ConfigError("soft_topk.ot_epsilon must be positive");
  if (sk.max_iters < 1) throw ConfigError("soft_topk.max_iters must be at least 1");
  if (sk.cost_power != 1 && sk.cost_power != 2)
    throw ConfigError("soft_topk.cost_power must be 1 or 2");

  cfg.train.learning_rate = get_or<double>(train, "learning_rate", cfg.train.learning_rate);
  cfg.train.weight_decay = get_or<double>(train, "weight_decay", cfg.train.weight_decay);
  cfg.train.epochs = get_or<int>(train, "epochs", cfg.train.epochs);
  cfg.train.batch_size = get_or<int>(train, "batch_size", cfg.train.batch_size);
  cfg.train.seed = get_or<std::uint64_t>(train, "seed", cfg.train.seed);
  cfg.train.refresh =
      parse_refresh(get_or<std::string>(train, "center_refresh", "fixed_after_init"));
  cfg.train.hard_selection = get_or<bool>(train, "hard_selection", cfg.train.hard_selection);
  cfg.train.k = sk.k;
  cfg.train.epsilon = cfg.descriptor.epsilon;
  if (cfg.train.learning_rate <= 0.0) throw ConfigError("train.learning_rate must be positive");
  if (cfg.train.epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (cfg.train.batch_size < 1) throw ConfigError("train.batch_size must be at least 1");

  cfg.paths.dataset_root = get_or<std::string>(paths, "dataset_root", cfg.paths.dataset_root);
  cfg.paths.checkpoint_out =
      get_or<std::string>(paths, "checkpoint_out", cfg.paths.checkpoint_out);
  cfg.paths.train_log_out = get_or<std::string>(paths, "train_log_out", cfg.paths.train_log_out);
  cfg.paths.report_out = get_or<std::string>(eval, "report_out", cfg.paths.report_out);
  cfg.paths.roc_out = get_or<std::string>(eval, "roc_out", cfg.paths.roc_out);
  cfg.paths.ablation_table_out =
      get_or<std::string>(paths, "ablation_table_out", cfg.paths.ablation_table_out);
  cfg.paths.ablation_csv_out =
      get_or<std::string>(paths, "ablation_csv_out", cfg.paths.ablation_csv_out);

  const size_t taps = cfg.backbone.tap_names.size();
  if (cfg.backbone.source == "pretrained" &&
      (cfg.backbone.tap_channels.size() != taps || cfg.backbone.tap_divisors.size() != taps))
    throw ConfigError("backbone tap_names, tap_channels, and tap_divisors must align");

  YAML::Emitter out;
  out << root;
  cfg.effective_yaml = out.c_str();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), overrides);
}

}  // namespace adfa
