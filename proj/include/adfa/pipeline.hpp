// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adfa/checkpoint.hpp"
#include "adfa/config.hpp"
#include "adfa/dataset.hpp"
#include "adfa/scoring_eval.hpp"
#include "adfa/synth.hpp"

namespace adfa {

/// Resolve a backbone weights file: the path as given when it exists,
/// otherwise a relative path is also tried under $ADFA_CACHE.
std::string resolve_weights_path(const std::string& path);

std::unique_ptr<FeatureExtractor> make_backbone(const BackboneConfig& cfg);

/// Decode, preprocess, extract, and fuse features for each file in turn.
std::vector<Planes> fused_features(const std::vector<DatasetFile>& files,
                                   const FeatureExtractor& fx, const PreprocessConfig& pre);

struct TrainArtifacts {
  std::string checkpoint_path;
  std::string checkpoint_sha256;
  TrainLog log;
  std::vector<std::string> dataset_warnings;
};

/// Full training command: scan the dataset, train the descriptor, and write
/// the checkpoint plus a JSON train log.
TrainArtifacts run_train(const RunConfig& cfg);

/// Full evaluation command: the backbone built from `cfg` must match the
/// checkpoint's recorded backbone fingerprint. Writes the report JSON and,
/// when configured, the ROC plot.
EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path);

struct ScoreLine {
  std::string path;
  double score = 0.0;
};

/// Score individual image files with a checkpoint alone; the backbone is
/// rebuilt from the recipe embedded in the checkpoint.
std::vector<ScoreLine> run_score(const std::string& checkpoint_path,
                                 const std::vector<std::string>& files);

/// The default ablation grid over attention strength, selection operator,
/// and backbone initialization. Writes the rendered table and the CSV.
AblationGrid run_ablate(const RunConfig& cfg, const std::string& grid_name);

}  // namespace adfa
