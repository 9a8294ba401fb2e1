// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/scoring_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace adfa {

namespace {

std::string arm_name(const AblationCell& cell) {
  if (cell.random_backbone) return "random-init";
  if (cell.hard_selection) return "hard-top-k";
  std::ostringstream os;
  os << "soft eps=" << cell.epsilon;
  return os.str();
}

nlohmann::json model_config_json(const Model& model) {
  nlohmann::json j;
  j["k"] = model.topk.k;
  j["ot_epsilon"] = model.topk.ot_epsilon;
  j["ot_max_iters"] = model.topk.max_iters;
  j["ot_tolerance"] = model.topk.tolerance;
  j["anchor_mode"] =
      model.topk.anchor_mode == AnchorMode::min_max_of_input ? "min_max_of_input" : "fixed_unit";
  j["cost_power"] = model.topk.cost_power;
  j["backward_mode"] = model.topk.backward_mode == BackwardMode::unrolled ? "unrolled" : "implicit";
  j["epsilon"] = model.params.epsilon;
  j["d_prime"] = model.params.d_prime;
  j["learning_rate"] = model.train_echo.learning_rate;
  j["weight_decay"] = model.train_echo.weight_decay;
  j["epochs"] = model.train_echo.epochs;
  j["batch_size"] = model.train_echo.batch_size;
  j["seed"] = model.train_echo.seed;
  j["hard_selection"] = model.train_echo.hard_selection;
  j["center_refresh"] =
      model.train_echo.refresh == CenterRefresh::per_epoch ? "per_epoch" : "fixed_after_init";
  j["backbone_fingerprint"] = model.backbone_fingerprint;
  return j;
}

}  // namespace

AnomalyScore score_patches(const Mat& patches, const CenterBank& bank,
                           const SoftTopKConfig& topk, bool hard_selection, bool keep_per_patch,
                           const std::string& image_id) {
  if (patches.cols() != bank.centers.cols())
    throw ArgumentError("score_patches: feature dimension disagrees with the center bank");
  const Mat dist = pairwise_distances(patches, bank.centers);
  const Eigen::Index hw = dist.rows();
  const Eigen::Index n = dist.cols();
  Vec per_patch(hw);
  for (Eigen::Index t = 0; t < hw; ++t) {
    const Vec d = dist.row(t).transpose();
    Vec z;
    if (topk.k == n) {
      // selecting all n of n centers is forced; nothing to relax
      z = Vec::Ones(n);
    } else if (hard_selection) {
      z = hard_topk<double>(d, topk.k);
    } else {
      z = soft_topk<double>(d, topk);
    }
    per_patch(t) = z.dot(d);
  }
  AnomalyScore out;
  out.image_id = image_id;
  out.score = per_patch.maxCoeff();
  if (keep_per_patch) out.per_patch = std::move(per_patch);
  return out;
}

AnomalyScore score_features(const Planes& features, const Model& model, bool keep_per_patch,
                            const std::string& image_id) {
  const Mat patches = descriptor_forward(features, model.params).patches;
  return score_patches(patches, model.bank, model.topk, model.train_echo.hard_selection,
                       keep_per_patch, image_id);
}

double auroc(std::vector<double> normal_scores, std::vector<double> abnormal_scores) {
  if (normal_scores.empty() || abnormal_scores.empty())
    throw ArgumentError("auroc: both classes must be nonempty");
  std::sort(normal_scores.begin(), normal_scores.end());
  double wins = 0.0, ties = 0.0;
  for (const double a : abnormal_scores) {
    const auto lo = std::lower_bound(normal_scores.begin(), normal_scores.end(), a);
    const auto hi = std::upper_bound(lo, normal_scores.end(), a);
    wins += static_cast<double>(lo - normal_scores.begin());
    ties += static_cast<double>(hi - lo);
  }
  const double pairs =
      static_cast<double>(normal_scores.size()) * static_cast<double>(abnormal_scores.size());
  return (wins + 0.5 * ties) / pairs;
}

std::vector<std::pair<double, double>> roc_curve(std::vector<double> normal_scores,
                                                 std::vector<double> abnormal_scores) {
  if (normal_scores.empty() || abnormal_scores.empty())
    throw ArgumentError("roc_curve: both classes must be nonempty");
  std::vector<double> all = normal_scores;
  all.insert(all.end(), abnormal_scores.begin(), abnormal_scores.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::sort(normal_scores.begin(), normal_scores.end());
  std::sort(abnormal_scores.begin(), abnormal_scores.end());
  const double nn = static_cast<double>(normal_scores.size());
  const double na = static_cast<double>(abnormal_scores.size());
  auto frac_at_least = [](const std::vector<double>& sorted, double thr) {
    return static_cast<double>(sorted.end() -
                               std::lower_bound(sorted.begin(), sorted.end(), thr));
  };

  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  for (const double thr : all)
    pts.emplace_back(frac_at_least(normal_scores, thr) / nn,
                     frac_at_least(abnormal_scores, thr) / na);
  if (pts.back() != std::make_pair(1.0, 1.0)) pts.emplace_back(1.0, 1.0);
  return pts;
}

std::string render_roc_svg(const std::vector<std::pair<double, double>>& points,
                           double auroc_value) {
  const int size = 420, margin = 40, span = size - 2 * margin;
  auto px = [&](double v) { return margin + v * span; };
  auto py = [&](double v) { return size - margin - v * span; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << " " << size << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
     << py(0) << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
     << py(1) << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
     << py(1) << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n"
     << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  for (const auto& [fpr, tpr] : points) os << px(fpr) << "," << py(tpr) << " ";
  os << "\"/>\n"
     << "<text x=\"" << size / 2 << "\" y=\"" << size - 8
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">false positive "
        "rate</text>\n"
     << "<text x=\"12\" y=\"" << size / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        "transform=\"rotate(-90 12 "
     << size / 2 << ")\">true positive rate</text>\n"
     << "<text x=\"" << px(0.62) << "\" y=\"" << py(0.08)
     << "\" font-family=\"sans-serif\" font-size=\"14\">AUROC = " << auroc_value << "</text>\n"
     << "</svg>\n";
  return os.str();
}

EvalReport evaluate(const EvalInput& input, const Model& model) {
  if (input.normal_features.empty() || input.abnormal_features.empty())
    throw ArgumentError("evaluate: test set needs both classes");
  const auto t0 = std::chrono::steady_clock::now();

  EvalReport report;
  report.dataset_name = input.dataset_name;
  report.checkpoint_sha256 = model.checkpoint_sha256;
  for (size_t i = 0; i < input.normal_features.size(); ++i) {
    const std::string id = i < input.normal_ids.size() ? input.normal_ids[i] : "";
    report.normal_scores.push_back(score_features(input.normal_features[i], model, false, id).score);
  }
  for (size_t i = 0; i < input.abnormal_features.size(); ++i) {
    const std::string id = i < input.abnormal_ids.size() ? input.abnormal_ids[i] : "";
    report.abnormal_scores.push_back(
        score_features(input.abnormal_features[i], model, false, id).score);
  }
  report.n_normal = static_cast<int>(report.normal_scores.size());
  report.n_abnormal = static_cast<int>(report.abnormal_scores.size());
  report.auroc_value = auroc(report.normal_scores, report.abnormal_scores);
  report.config_echo_json = model_config_json(model).dump();
  const auto t1 = std::chrono::steady_clock::now();
  report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["dataset"] = report.dataset_name;
  j["auroc"] = report.auroc_value;
  j["n_normal"] = report.n_normal;
  j["n_abnormal"] = report.n_abnormal;
  j["scores"]["normal"] = report.normal_scores;
  j["scores"]["abnormal"] = report.abnormal_scores;
  j["config"] = nlohmann::json::parse(report.config_echo_json.empty() ? "{}"
                                                                      : report.config_echo_json);
  j["checkpoint_sha256"] = report.checkpoint_sha256;
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2);
}

AblationGrid ablation_run(const std::vector<Planes>& train_images,
                          const std::vector<Planes>& test_normal_images,
                          const std::vector<Planes>& test_abnormal_images,
                          const FeatureExtractor& default_backbone,
                          const FeatureExtractor& random_backbone, const TrainConfig& base,
                          int d_prime, std::uint64_t descriptor_seed, const AblationSpec& spec,
                          const std::string& fingerprint_base) {
  AblationGrid grid;
  for (const double eps : spec.epsilons) {
    AblationCell cell;
    cell.epsilon = eps;
    grid.cells.push_back(cell);
  }
  if (spec.include_hard) {
    AblationCell cell;
    cell.epsilon = base.epsilon;
    cell.hard_selection = true;
    grid.cells.push_back(cell);
  }
  if (spec.include_random_backbone) {
    AblationCell cell;
    cell.epsilon = base.epsilon;
    cell.random_backbone = true;
    grid.cells.push_back(cell);
  }

  struct Extracted {
    std::vector<Planes> train, normal, abnormal;
    bool ready = false;
  };
  Extracted cache[2];
  auto features_for = [&](bool random) -> Extracted& {
    Extracted& slot = cache[random ? 1 : 0];
    if (!slot.ready) {
      const FeatureExtractor& fx = random ? random_backbone : default_backbone;
      auto fuse_all = [&](const std::vector<Planes>& images) {
        std::vector<Planes> out;
        out.reserve(images.size());
        for (const auto& ms : extract_features(images, fx)) out.push_back(fuse_and_embed(ms));
        return out;
      };
      slot.train = fuse_all(train_images);
      slot.normal = fuse_all(test_normal_images);
      slot.abnormal = fuse_all(test_abnormal_images);
      slot.ready = true;
    }
    return slot;
  };

  for (auto& cell : grid.cells) {
    cell.label = arm_name(cell);
    try {
      const Extracted& feats = features_for(cell.random_backbone);
      const int in_channels = feats.train.front().channels();
      DescriptorParams params =
          descriptor_init<double>(in_channels, d_prime, cell.epsilon, descriptor_seed);
      TrainConfig cfg = base;
      cfg.epsilon = cell.epsilon;
      cfg.hard_selection = cell.hard_selection;
      const FeatureExtractor& fx = cell.random_backbone ? random_backbone : default_backbone;
      const auto trained = train(feats.train, params, cfg, fingerprint_base + ":" + cell.label);

      Model model;
      model.params = trained.params;
      model.bank = trained.bank;
      model.topk = cfg.topk;
      model.topk.k = cfg.k;
      model.train_echo = cfg;
      model.backbone_fingerprint = fx.fingerprint();

      EvalInput input;
      input.dataset_name = cell.label;
      input.normal_features = feats.normal;
      input.abnormal_features = feats.abnormal;
      cell.auroc_value = evaluate(input, model).auroc_value;
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  }
  return grid;
}

std::string render_ablation_table(const AblationGrid& grid) {
  std::ostringstream os;
  os << "arm             epsilon  operator  backbone    auroc\n";
  for (const auto& cell : grid.cells) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-15s %-8.2f %-9s %-11s %s\n", cell.label.c_str(),
                  cell.epsilon, cell.hard_selection ? "hard" : "soft",
                  cell.random_backbone ? "random" : "pretrained",
                  cell.ok ? std::to_string(cell.auroc_value).c_str()
                          : ("failed: " + cell.error).c_str());
    os << line;
  }
  return os.str();
}

std::string render_ablation_csv(const AblationGrid& grid) {
  std::ostringstream os;
  os << "label,epsilon,operator,backbone,auroc,error\n";
  for (const auto& cell : grid.cells) {
    std::string err = cell.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n') ch = ' ';
    os << cell.label << "," << cell.epsilon << "," << (cell.hard_selection ? "hard" : "soft")
       << "," << (cell.random_backbone ? "random" : "pretrained") << ",";
    if (cell.ok) os << cell.auroc_value;
    os << "," << err << "\n";
  }
  return os.str();
}

}  // namespace adfa
