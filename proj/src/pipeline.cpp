// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "adfa/hash.hpp"
#include "adfa/image.hpp"
#include "adfa/onnx_backbone.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace adfa {

namespace {

std::string bank_fingerprint(const DatasetManifest& manifest, std::uint64_t descriptor_seed) {
  return "dataset:" + manifest_hash(manifest) +
         ":descriptor_seed:" + std::to_string(descriptor_seed);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

Model assemble_model(const TrainResult<double>& trained, const TrainConfig& train_cfg,
                     const std::string& backbone_fingerprint) {
  Model model;
  model.params = trained.params;
  model.bank = trained.bank;
  model.topk = train_cfg.topk;
  model.topk.k = train_cfg.k;
  model.train_echo = train_cfg;
  model.backbone_fingerprint = backbone_fingerprint;
  return model;
}

void require_test_splits(const DatasetManifest& manifest) {
  if (manifest.test_normal.empty())
    throw IngestionError("dataset '" + manifest.root + "' has no test/normal images");
  if (manifest.test_abnormal.empty())
    throw IngestionError("dataset '" + manifest.root + "' has no test/abnormal images");
}

}  // namespace

std::string resolve_weights_path(const std::string& path) {
  if (path.empty())
    throw ConfigError("backbone.weights_path is required when backbone.source is pretrained");
  if (fs::exists(path)) return path;
  if (!fs::path(path).is_absolute()) {
    if (const char* cache = std::getenv("ADFA_CACHE")) {
      const fs::path alt = fs::path(cache) / path;
      if (fs::exists(alt)) return alt.string();
    }
  }
  throw IngestionError("backbone weights '" + path +
                       "' not found (relative paths are also tried under $ADFA_CACHE)");
}

std::unique_ptr<FeatureExtractor> make_backbone(const BackboneConfig& cfg) {
  if (cfg.source == "random_seeded")
    return std::make_unique<SeededConvBackbone>(cfg.seed, cfg.stem_channels, cfg.tap_channels);
  return std::make_unique<OnnxBackbone>(resolve_weights_path(cfg.weights_path), cfg.tap_names,
                                        cfg.tap_channels, cfg.tap_divisors);
}

std::vector<Planes> fused_features(const std::vector<DatasetFile>& files,
                                   const FeatureExtractor& fx, const PreprocessConfig& pre) {
  std::vector<Planes> out;
  out.reserve(files.size());
  for (const auto& file : files) {
    std::vector<Planes> one{preprocess_image(load_image(file.path), pre)};
    out.push_back(fuse_and_embed(extract_features(one, fx).front()));
  }
  return out;
}

TrainArtifacts run_train(const RunConfig& cfg) {
  if (cfg.paths.dataset_root.empty()) throw ConfigError("paths.dataset_root is required");
  const DatasetManifest manifest = load_dataset(cfg.paths.dataset_root);
  const auto fx = make_backbone(cfg.backbone);
  const std::vector<Planes> feats =
      fused_features(manifest.train_normal, *fx, cfg.backbone.preprocess);

  DescriptorParams params =
      descriptor_init<double>(feats.front().channels(), cfg.descriptor.d_prime,
                              cfg.descriptor.epsilon, cfg.descriptor.seed, cfg.descriptor.gamma,
                              cfg.descriptor.b);
  const TrainResult<double> trained =
      train(feats, params, cfg.train, bank_fingerprint(manifest, cfg.descriptor.seed));
  const Model model = assemble_model(trained, cfg.train, fx->fingerprint());

  TrainArtifacts artifacts;
  artifacts.checkpoint_path = cfg.paths.checkpoint_out;
  artifacts.checkpoint_sha256 =
      save_checkpoint(cfg.paths.checkpoint_out, model, cfg.backbone, cfg.effective_yaml);
  artifacts.log = trained.log;
  artifacts.dataset_warnings = manifest.warnings;

  nlohmann::json j;
  j["dataset_manifest_hash"] = manifest_hash(manifest);
  j["n_train"] = manifest.train_normal.size();
  j["checkpoint"] = cfg.paths.checkpoint_out;
  j["checkpoint_sha256"] = artifacts.checkpoint_sha256;
  j["nonconverged_rows"] = trained.log.nonconverged_rows;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : trained.log.epochs)
    j["epochs"].push_back(
        {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"wall_seconds", e.wall_seconds}});
  j["config_yaml"] = cfg.effective_yaml;
  j["warnings"] = manifest.warnings;
  write_text_file(cfg.paths.train_log_out, j.dump(2) + "\n");
  return artifacts;
}

EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
  if (cfg.paths.dataset_root.empty()) throw ConfigError("paths.dataset_root is required");
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const auto fx = make_backbone(cfg.backbone);
  if (fx->fingerprint() != loaded.model.backbone_fingerprint)
    throw ConfigError("configured backbone (" + fx->fingerprint() +
                      ") does not match the checkpoint's backbone (" +
                      loaded.model.backbone_fingerprint + ")");

  const DatasetManifest manifest = load_dataset(cfg.paths.dataset_root);
  require_test_splits(manifest);

  EvalInput input;
  input.dataset_name = fs::path(manifest.root).filename().string();
  input.normal_features = fused_features(manifest.test_normal, *fx, cfg.backbone.preprocess);
  input.abnormal_features = fused_features(manifest.test_abnormal, *fx, cfg.backbone.preprocess);
  for (const auto& f : manifest.test_normal)
    input.normal_ids.push_back(fs::path(f.path).filename().string());
  for (const auto& f : manifest.test_abnormal)
    input.abnormal_ids.push_back(fs::path(f.path).filename().string());

  EvalReport report = evaluate(input, loaded.model);
  auto echo = nlohmann::json::parse(report.config_echo_json);
  echo["run_config_yaml"] = loaded.run_config_yaml;
  echo["dataset_manifest_hash"] = manifest_hash(manifest);
  report.config_echo_json = echo.dump();

  write_text_file(cfg.paths.report_out, report_to_json(report) + "\n");
  if (!cfg.paths.roc_out.empty())
    write_text_file(cfg.paths.roc_out,
                    render_roc_svg(roc_curve(report.normal_scores, report.abnormal_scores),
                                   report.auroc_value));
  return report;
}

std::vector<ScoreLine> run_score(const std::string& checkpoint_path,
                                 const std::vector<std::string>& files) {
  if (files.empty()) throw ArgumentError("score: no input files given");
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const auto fx = make_backbone(loaded.backbone);
  if (fx->fingerprint() != loaded.model.backbone_fingerprint)
    throw ConfigError("backbone rebuilt from the checkpoint recipe (" + fx->fingerprint() +
                      ") does not match the recorded fingerprint (" +
                      loaded.model.backbone_fingerprint + ")");

  std::vector<ScoreLine> lines;
  lines.reserve(files.size());
  for (const auto& path : files) {
    std::vector<Planes> one{preprocess_image(load_image(path), loaded.backbone.preprocess)};
    const Planes fused = fuse_and_embed(extract_features(one, *fx).front());
    lines.push_back({path, score_features(fused, loaded.model, false, path).score});
  }
  return lines;
}

AblationGrid run_ablate(const RunConfig& cfg, const std::string& grid_name) {
  if (grid_name != "default")
    throw ArgumentError("unknown ablation grid '" + grid_name + "' (available: default)");
  if (cfg.paths.dataset_root.empty()) throw ConfigError("paths.dataset_root is required");
  const DatasetManifest manifest = load_dataset(cfg.paths.dataset_root);
  require_test_splits(manifest);

  auto preprocess_all = [&](const std::vector<DatasetFile>& files) {
    std::vector<Planes> out;
    out.reserve(files.size());
    for (const auto& f : files)
      out.push_back(preprocess_image(load_image(f.path), cfg.backbone.preprocess));
    return out;
  };
  const std::vector<Planes> train_images = preprocess_all(manifest.train_normal);
  const std::vector<Planes> test_normal = preprocess_all(manifest.test_normal);
  const std::vector<Planes> test_abnormal = preprocess_all(manifest.test_abnormal);

  const auto fx = make_backbone(cfg.backbone);
  const std::uint64_t random_seed =
      cfg.backbone.source == "random_seeded" ? cfg.backbone.seed + 1 : cfg.backbone.seed;
  const SeededConvBackbone random_fx(random_seed, cfg.backbone.stem_channels,
                                     cfg.backbone.tap_channels);

  const AblationGrid grid =
      ablation_run(train_images, test_normal, test_abnormal, *fx, random_fx, cfg.train,
                   cfg.descriptor.d_prime, cfg.descriptor.seed, AblationSpec{},
                   bank_fingerprint(manifest, cfg.descriptor.seed));
  write_text_file(cfg.paths.ablation_table_out, render_ablation_table(grid));
  write_text_file(cfg.paths.ablation_csv_out, render_ablation_csv(grid));
  return grid;
}

}  // namespace adfa
