// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adfa/backbone.hpp"
#include "adfa/model.hpp"
#include "adfa/soft_topk.hpp"
#include "adfa/types.hpp"

namespace adfa {

struct AnomalyScore {
  std::string image_id;
  double score = 0.0;
  Vec per_patch;  // empty unless retained
};

/// Image-level anomaly score: the maximum over patch positions of the
/// top-k-weighted distance to the center bank, under the same selection
/// configuration used in training.
AnomalyScore score_patches(const Mat& patches, const CenterBank& bank,
                           const SoftTopKConfig& topk, bool hard_selection = false,
                           bool keep_per_patch = false, const std::string& image_id = "");

/// Score one fused feature tensor end to end through the descriptor.
AnomalyScore score_features(const Planes& features, const Model& model,
                            bool keep_per_patch = false, const std::string& image_id = "");

/// Exact Mann-Whitney AUROC: the fraction of (abnormal, normal) pairs with
/// the abnormal score strictly higher, ties counted half. Abnormal is the
/// positive class.
double auroc(std::vector<double> normal_scores, std::vector<double> abnormal_scores);

/// ROC points (fpr, tpr) from (0,0) to (1,1), one step per distinct score.
std::vector<std::pair<double, double>> roc_curve(std::vector<double> normal_scores,
                                                 std::vector<double> abnormal_scores);

/// Self-contained SVG rendering of a ROC curve.
std::string render_roc_svg(const std::vector<std::pair<double, double>>& points, double auroc_value);

struct EvalInput {
  std::string dataset_name;
  std::vector<Planes> normal_features;
  std::vector<Planes> abnormal_features;
  std::vector<std::string> normal_ids;    // optional, sized like the features or empty
  std::vector<std::string> abnormal_ids;  // optional
};

struct EvalReport {
  std::string dataset_name;
  double auroc_value = 0.0;
  int n_normal = 0;
  int n_abnormal = 0;
  std::vector<double> normal_scores;
  std::vector<double> abnormal_scores;
  std::string config_echo_json;  // config echo captured at evaluation time
  std::string checkpoint_sha256;
  double wall_seconds = 0.0;
};

/// Score both classes of a test split and compute the AUROC.
EvalReport evaluate(const EvalInput& input, const Model& model);

/// Serialize a report with stable key names (auroc, n_normal, n_abnormal,
/// scores, config, checkpoint_sha256).
std::string report_to_json(const EvalReport& report);

struct AblationCell {
  std::string label;
  double epsilon = 0.1;
  bool hard_selection = false;
  bool random_backbone = false;
  bool ok = false;
  double auroc_value = 0.0;
  std::string error;
};

struct AblationSpec {
  std::vector<double> epsilons{0.0, 0.05, 0.10, 0.20};
  bool include_hard = true;
  bool include_random_backbone = true;
};

struct AblationGrid {
  std::vector<AblationCell> cells;
};

/// Train and evaluate one cell per grid entry from identical data and seed.
/// A cell failure is recorded in its cell; remaining cells still run. The
/// random-backbone arm re-extracts features with the seeded extractor.
AblationGrid ablation_run(const std::vector<Planes>& train_images,
                          const std::vector<Planes>& test_normal_images,
                          const std::vector<Planes>& test_abnormal_images,
                          const FeatureExtractor& default_backbone,
                          const FeatureExtractor& random_backbone, const TrainConfig& base,
                          int d_prime, std::uint64_t descriptor_seed,
                          const AblationSpec& spec, const std::string& fingerprint_base);

/// Fixed-width text table of a grid, one row per cell.
std::string render_ablation_table(const AblationGrid& grid);

/// CSV with the same cells (label, epsilon, operator, backbone, auroc, error).
std::string render_ablation_csv(const AblationGrid& grid);

}  // namespace adfa
