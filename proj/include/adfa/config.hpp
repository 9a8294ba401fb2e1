// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adfa/adaptation.hpp"
#include "adfa/image.hpp"
#include "adfa/soft_topk.hpp"

namespace adfa {

struct BackboneConfig {
  std::string source = "pretrained";  // "pretrained" | "random_seeded"
  std::string weights_path;           // ONNX file; relative paths also resolve under ADFA_CACHE
  std::vector<std::string> tap_names{"tap1", "tap2", "tap3"};
  std::vector<int> tap_channels{256, 512, 1024};
  std::vector<int> tap_divisors{4, 8, 16};
  std::uint64_t seed = 0;   // random_seeded only
  int stem_channels = 64;   // random_seeded only
  PreprocessConfig preprocess;
};

struct DescriptorConfig {
  int d_prime = 448;
  double epsilon = 0.1;
  std::uint64_t seed = 1;
  int gamma = 2;  // adaptive attention kernel rule
  int b = 1;
};

struct OutputPaths {
  std::string dataset_root;
  std::string checkpoint_out = "checkpoint.adfa";
  std::string train_log_out = "train_log.json";
  std::string report_out = "eval_report.json";
  std::string roc_out;  // empty = no plot
  std::string ablation_table_out = "ablation.txt";
  std::string ablation_csv_out = "ablation.csv";
};

/// Everything one run needs, parsed from a YAML file plus `--set key=value`
/// overrides. Unknown keys anywhere in the file are rejected. The effective
/// (post-override) YAML text is kept for verbatim echo into artifacts.
struct RunConfig {
  BackboneConfig backbone;
  DescriptorConfig descriptor;
  TrainConfig train;  // k mirrors soft_topk.k; epsilon mirrors descriptor.epsilon
  OutputPaths paths;
  std::string effective_yaml;
};

/// Parse a config file. `overrides` are dotted-path assignments such as
/// "train.epochs=3"; they are applied to the document before validation.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Parse config text directly (the file-based loader delegates here).
RunConfig parse_run_config(const std::string& yaml_text,
                           const std::vector<std::string>& overrides = {});

}  // namespace adfa
