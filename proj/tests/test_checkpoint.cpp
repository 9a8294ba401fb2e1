// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "adfa/hash.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

adfa::Model sample_model() {
  adfa::Model model;
  model.params = adfa::descriptor_init<double>(10, 6, 0.2, 77);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  model.bank.centers.resize(9, 6);
  for (Eigen::Index r = 0; r < 9; ++r)
    for (Eigen::Index c = 0; c < 6; ++c) model.bank.centers(r, c) = dist(rng);
  model.bank.source_fingerprint = "dataset:abc:descriptor_seed:77";
  model.bank.refresh_policy = adfa::CenterRefresh::per_epoch;
  model.topk.k = 2;
  model.topk.ot_epsilon = 0.05;
  model.topk.max_iters = 333;
  model.topk.tolerance = 1e-7;
  model.topk.anchor_mode = adfa::AnchorMode::fixed_unit;
  model.topk.cost_power = 1;
  model.topk.backward_mode = adfa::BackwardMode::implicit;
  model.train_echo.learning_rate = 0.025;
  model.train_echo.weight_decay = 0.005;
  model.train_echo.epochs = 12;
  model.train_echo.batch_size = 3;
  model.train_echo.seed = 42;
  model.train_echo.k = 2;
  model.train_echo.epsilon = 0.2;
  model.train_echo.refresh = adfa::CenterRefresh::per_epoch;
  model.train_echo.hard_selection = true;
  model.backbone_fingerprint = "onnx:deadbeef";
  return model;
}

adfa::BackboneConfig sample_backbone() {
  adfa::BackboneConfig b;
  b.source = "pretrained";
  b.weights_path = "weights.onnx";
  b.tap_names = {"x", "y", "z"};
  b.tap_channels = {4, 6, 8};
  b.tap_divisors = {4, 8, 16};
  b.seed = 13;
  b.stem_channels = 7;
  b.preprocess.resize_edge = 96;
  b.preprocess.crop_size = 80;
  b.preprocess.channel_mean = {0.1, 0.2, 0.3};
  b.preprocess.channel_std = {0.4, 0.5, 0.6};
  b.preprocess.resize_filter = adfa::ResizeFilter::bicubic;
  return b;
}

float f32(double v) { return static_cast<float>(v); }

}  // namespace

TEST_CASE("checkpoint round trip restores everything at float32 precision") {
  const std::string path = (fs::temp_directory_path() / "adfa_ckpt_rt.adfa").string();
  const adfa::Model model = sample_model();
  const std::string sha = adfa::save_checkpoint(path, model, sample_backbone(), "a: 1");

  const adfa::LoadedCheckpoint loaded = adfa::load_checkpoint(path);
  CHECK(loaded.model.checkpoint_sha256 == sha);
  CHECK(loaded.model.checkpoint_sha256 == adfa::sha256_file_hex(path));

  const auto& p = loaded.model.params;
  REQUIRE(p.reduce_weights.rows() == model.params.reduce_weights.rows());
  REQUIRE(p.reduce_weights.cols() == model.params.reduce_weights.cols());
  for (Eigen::Index r = 0; r < p.reduce_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < p.reduce_weights.cols(); ++c)
      CHECK(p.reduce_weights(r, c) == static_cast<double>(f32(model.params.reduce_weights(r, c))));
  for (Eigen::Index i = 0; i < p.reduce_bias.size(); ++i)
    CHECK(p.reduce_bias(i) == static_cast<double>(f32(model.params.reduce_bias(i))));
  REQUIRE(p.attn_conv_weights.size() == model.params.attn_conv_weights.size());
  CHECK(p.d_prime == 6);
  CHECK(p.epsilon == 0.2);
  for (Eigen::Index r = 0; r < 9; ++r)
    for (Eigen::Index c = 0; c < 6; ++c)
      CHECK(loaded.model.bank.centers(r, c) ==
            static_cast<double>(f32(model.bank.centers(r, c))));

  CHECK(loaded.model.bank.source_fingerprint == model.bank.source_fingerprint);
  CHECK(loaded.model.bank.refresh_policy == adfa::CenterRefresh::per_epoch);
  CHECK(loaded.model.topk.k == 2);
  CHECK(loaded.model.topk.ot_epsilon == 0.05);
  CHECK(loaded.model.topk.max_iters == 333);
  CHECK(loaded.model.topk.tolerance == 1e-7);
  CHECK(loaded.model.topk.anchor_mode == adfa::AnchorMode::fixed_unit);
  CHECK(loaded.model.topk.cost_power == 1);
  CHECK(loaded.model.topk.backward_mode == adfa::BackwardMode::implicit);
  CHECK(loaded.model.train_echo.learning_rate == 0.025);
  CHECK(loaded.model.train_echo.epochs == 12);
  CHECK(loaded.model.train_echo.seed == 42);
  CHECK(loaded.model.train_echo.hard_selection);
  CHECK(loaded.model.train_echo.topk.max_iters == 333);
  CHECK(loaded.model.backbone_fingerprint == "onnx:deadbeef");

  const auto& b = loaded.backbone;
  CHECK(b.source == "pretrained");
  CHECK(b.weights_path == "weights.onnx");
  CHECK(b.tap_names == std::vector<std::string>{"x", "y", "z"});
  CHECK(b.tap_channels == std::vector<int>{4, 6, 8});
  CHECK(b.tap_divisors == std::vector<int>{4, 8, 16});
  CHECK(b.seed == 13);
  CHECK(b.stem_channels == 7);
  CHECK(b.preprocess.resize_edge == 96);
  CHECK(b.preprocess.crop_size == 80);
  CHECK(b.preprocess.channel_mean == std::array<double, 3>{0.1, 0.2, 0.3});
  CHECK(b.preprocess.resize_filter == adfa::ResizeFilter::bicubic);
  CHECK(loaded.run_config_yaml == "a: 1");
  fs::remove(path);
}

TEST_CASE("saving twice produces byte-identical files") {
  const auto dir = fs::temp_directory_path();
  const std::string p1 = (dir / "adfa_ckpt_d1.adfa").string();
  const std::string p2 = (dir / "adfa_ckpt_d2.adfa").string();
  const adfa::Model model = sample_model();
  const std::string s1 = adfa::save_checkpoint(p1, model, sample_backbone(), "cfg");
  const std::string s2 = adfa::save_checkpoint(p2, model, sample_backbone(), "cfg");
  CHECK(s1 == s2);
  CHECK(adfa::sha256_file_hex(p1) == adfa::sha256_file_hex(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("transport damage is reported as ingestion errors") {
  const auto dir = fs::temp_directory_path();
  const std::string path = (dir / "adfa_ckpt_bad.adfa").string();
  adfa::save_checkpoint(path, sample_model(), sample_backbone(), "cfg");

  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }

  auto write_variant = [&](const std::string& content) {
    const std::string p = (dir / "adfa_ckpt_variant.adfa").string();
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
    f.close();
    return p;
  };

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(adfa::load_checkpoint(write_variant(wrong_magic)), adfa::IngestionError);

  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_AS(adfa::load_checkpoint(write_variant(wrong_version)), adfa::IngestionError);

  CHECK_THROWS_AS(adfa::load_checkpoint(write_variant(bytes.substr(0, bytes.size() / 2))),
                  adfa::IngestionError);
  CHECK_THROWS_AS(adfa::load_checkpoint(write_variant(bytes.substr(0, 6))),
                  adfa::IngestionError);
  CHECK_THROWS_AS(adfa::load_checkpoint("/nonexistent/x.adfa"), adfa::IoError);
  fs::remove(path);
  fs::remove((dir / "adfa_ckpt_variant.adfa").string());
}

TEST_CASE("exact float32 values survive the container") {
  const std::string path = (fs::temp_directory_path() / "adfa_ckpt_pi.adfa").string();
  adfa::Model model = sample_model();
  model.params.reduce_weights(0, 0) = 3.14159265358979;
  model.bank.centers(0, 0) = -2.71828182845905;
  adfa::save_checkpoint(path, model, sample_backbone(), "");
  const adfa::LoadedCheckpoint loaded = adfa::load_checkpoint(path);
  CHECK(loaded.model.params.reduce_weights(0, 0) == static_cast<double>(3.14159265358979f));
  CHECK(loaded.model.bank.centers(0, 0) == static_cast<double>(-2.71828182845905f));
  fs::remove(path);
}
