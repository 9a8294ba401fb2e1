// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adfa/pipeline.hpp"

namespace {

int exit_code_for(adfa::ErrorClass cls) {
  switch (cls) {
    case adfa::ErrorClass::config: return 2;
    case adfa::ErrorClass::ingestion: return 3;
    case adfa::ErrorClass::numeric: return 4;
    case adfa::ErrorClass::argument: return 5;
    case adfa::ErrorClass::io: return 6;
    case adfa::ErrorClass::internal: return 1;
  }
  return 1;
}

void print_error(const char* cls, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::replace(message.begin(), message.end(), '"', '\'');
  std::cerr << "error class=" << cls << " message=\"" << message << "\"\n";
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const adfa::Error& e) {
    print_error(adfa::to_string(e.error_class()), e.what());
    return exit_code_for(e.error_class());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADFA: unsupervised image anomaly detection by descriptor adaptation"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, roc_out, grid = "default", out_dir;
  std::vector<std::string> overrides, files;
  std::uint64_t seed = 0;
  int n_train = 40, n_test_normal = 20, n_test_abnormal = 20, image_size = 64;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run config YAML file")->required();
    cmd->add_option("--set", overrides,
                    "override a config key, e.g. --set train.epochs=3 (repeatable)");
  };

  CLI::App* cmd_train = app.add_subcommand("train", "adapt the descriptor to a dataset");
  add_config(cmd_train);

  CLI::App* cmd_eval = app.add_subcommand("eval", "score a test split and report AUROC");
  add_config(cmd_eval);
  cmd_eval->add_option("--checkpoint", checkpoint, "trained checkpoint file")->required();
  cmd_eval->add_option("--roc-out", roc_out, "write the ROC curve SVG here");

  CLI::App* cmd_score = app.add_subcommand("score", "print one anomaly score per image");
  cmd_score->add_option("--checkpoint", checkpoint, "trained checkpoint file")->required();
  cmd_score->add_option("files", files, "image files to score")->required();

  CLI::App* cmd_ablate = app.add_subcommand("ablate", "train and evaluate every ablation arm");
  add_config(cmd_ablate);
  cmd_ablate->add_option("--grid", grid, "ablation grid name (default)");

  CLI::App* cmd_synth = app.add_subcommand("synth", "generate the synthetic dataset");
  cmd_synth->add_option("--out", out_dir, "output dataset directory")->required();
  cmd_synth->add_option("--seed", seed, "generator seed");
  cmd_synth->add_option("--n-train", n_train, "training images");
  cmd_synth->add_option("--n-test-normal", n_test_normal, "normal test images");
  cmd_synth->add_option("--n-test-abnormal", n_test_abnormal, "abnormal test images");
  cmd_synth->add_option("--image-size", image_size, "square image edge in pixels");

  CLI11_PARSE(app, argc, argv);

  if (cmd_train->parsed())
    return guarded([&] {
      const adfa::RunConfig cfg = adfa::load_run_config(config_path, overrides);
      const adfa::TrainArtifacts art = adfa::run_train(cfg);
      print_warnings(art.dataset_warnings);
      for (const auto& e : art.log.epochs)
        std::printf("epoch %d mean_loss %.6f wall_s %.2f\n", e.epoch, e.mean_loss,
                    e.wall_seconds);
      if (art.log.nonconverged_rows > 0)
        std::cerr << "warning: " << art.log.nonconverged_rows
                  << " soft top-k rows hit the iteration cap\n";
      std::printf("checkpoint %s sha256 %s\n", art.checkpoint_path.c_str(),
                  art.checkpoint_sha256.c_str());
      return 0;
    });

  if (cmd_eval->parsed())
    return guarded([&] {
      adfa::RunConfig cfg = adfa::load_run_config(config_path, overrides);
      if (!roc_out.empty()) cfg.paths.roc_out = roc_out;
      const adfa::EvalReport report = adfa::run_eval(cfg, checkpoint);
      std::printf("dataset %s auroc %.4f n_normal %d n_abnormal %d report %s\n",
                  report.dataset_name.c_str(), report.auroc_value, report.n_normal,
                  report.n_abnormal, cfg.paths.report_out.c_str());
      return 0;
    });

  if (cmd_score->parsed())
    return guarded([&] {
      for (const auto& line : adfa::run_score(checkpoint, files))
        std::printf("%s\t%.9g\n", line.path.c_str(), line.score);
      return 0;
    });

  if (cmd_ablate->parsed())
    return guarded([&] {
      const adfa::RunConfig cfg = adfa::load_run_config(config_path, overrides);
      const adfa::AblationGrid result = adfa::run_ablate(cfg, grid);
      std::fputs(adfa::render_ablation_table(result).c_str(), stdout);
      std::printf("table %s csv %s\n", cfg.paths.ablation_table_out.c_str(),
                  cfg.paths.ablation_csv_out.c_str());
      return 0;
    });

  return guarded([&] {
    adfa::SynthConfig scfg;
    scfg.seed = seed;
    scfg.n_train = n_train;
    scfg.n_test_normal = n_test_normal;
    scfg.n_test_abnormal = n_test_abnormal;
    scfg.image_size = image_size;
    const adfa::DatasetManifest manifest = adfa::generate_synthetic(out_dir, scfg);
    print_warnings(manifest.warnings);
    std::printf("dataset %s train %zu test_normal %zu test_abnormal %zu manifest %s\n",
                manifest.root.c_str(), manifest.train_normal.size(),
                manifest.test_normal.size(), manifest.test_abnormal.size(),
                adfa::manifest_hash(manifest).c_str());
    return 0;
  });
}
