// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/backbone.hpp"

#include <filesystem>

#include "adfa/image.hpp"
#include "adfa/onnx_backbone.hpp"
#include "doctest.h"
#include "test_util.hpp"

using adfa::MultiScaleFeatures;
using adfa::Planes;
using adfa::TapShape;

namespace {

const std::string kFixtureDir = std::string(ADFA_TEST_DIR) + "/fixtures";

Planes random_planes(std::mt19937_64& gen, int channels, int h, int w, double lo = -1.0,
                     double hi = 1.0) {
  Planes p(channels, h, w);
  p.data = testutil::random_mat(gen, channels, h * w, lo, hi);
  return p;
}

adfa::OnnxBackbone fixture_backbone() {
  return adfa::OnnxBackbone(kFixtureDir + "/tiny_backbone.onnx", {"c1_out", "c2_out", "c3_out"},
                            {4, 6, 8}, {4, 8, 16});
}

struct LyingExtractor : adfa::FeatureExtractor {
  adfa::SeededConvBackbone inner{1, 4, {8, 16}};
  MultiScaleFeatures extract(const Planes& image) const override { return inner.extract(image); }
  std::vector<TapShape> expected_shapes(int, int) const override {
    return {{8, 1, 1}, {16, 1, 1}};
  }
  std::string fingerprint() const override { return "lying"; }
  adfa::WeightsSource source() const override { return adfa::WeightsSource::random_seeded; }
};

}  // namespace

TEST_CASE("coordinate_channels: spacing, corners, and degenerate extents") {
  const Planes row = adfa::coordinate_channels<double>(1, 3);
  CHECK(row.at(0, 0, 0) == 0.0);
  CHECK(row.at(0, 0, 2) == 0.0);
  CHECK(row.at(1, 0, 0) == -1.0);
  CHECK(row.at(1, 0, 1) == 0.0);
  CHECK(row.at(1, 0, 2) == 1.0);

  const Planes grid = adfa::coordinate_channels<double>(7, 5);
  CHECK(grid.at(0, 0, 0) == -1.0);
  CHECK(grid.at(1, 0, 0) == -1.0);
  CHECK(grid.at(0, 0, 4) == -1.0);
  CHECK(grid.at(1, 0, 4) == 1.0);
  CHECK(grid.at(0, 6, 0) == 1.0);
  CHECK(grid.at(1, 6, 0) == -1.0);
  CHECK(grid.at(0, 6, 4) == 1.0);
  CHECK(grid.at(1, 6, 4) == 1.0);
  CHECK(grid.data.minCoeff() >= -1.0);
  CHECK(grid.data.maxCoeff() <= 1.0);

  const Planes dot = adfa::coordinate_channels<double>(1, 1);
  CHECK(dot.at(0, 0, 0) == 0.0);
  CHECK(dot.at(1, 0, 0) == 0.0);
}

TEST_CASE("bilinear_resize: constants pass through exactly") {
  Planes in(3, 7, 5);
  in.data.row(0).setConstant(0.37);
  in.data.row(1).setConstant(-2.0);
  in.data.row(2).setConstant(1e9);
  const Planes out = adfa::bilinear_resize(in, 56, 56);
  CHECK((out.data.row(0).array() == 0.37).all());
  CHECK((out.data.row(1).array() == -2.0).all());
  CHECK((out.data.row(2).array() == 1e9).all());
}

TEST_CASE("bilinear_resize: same size is the identity") {
  auto gen = testutil::rng(5);
  const Planes in = random_planes(gen, 2, 6, 9);
  const Planes out = adfa::bilinear_resize(in, 6, 9);
  CHECK(out.data == in.data);
}

TEST_CASE("bilinear_resize: hand-computed 2x upsample") {
  Planes in(1, 2, 2);
  in.data << 0.0, 4.0, 8.0, 12.0;
  const Planes out = adfa::bilinear_resize(in, 4, 4);
  CHECK(out.at(0, 0, 0) == 0.0);
  CHECK(out.at(0, 3, 3) == 12.0);
  CHECK(out.at(0, 0, 3) == 4.0);
  CHECK(out.at(0, 3, 0) == 8.0);
  CHECK(out.at(0, 1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(out.at(0, 2, 2) == doctest::Approx(9.0).epsilon(1e-12));
  // (r=1, c=2) samples at ty=0.25, tx=0.75
  CHECK(out.at(0, 1, 2) == doctest::Approx(0.1875 * 0 + 0.5625 * 4 + 0.0625 * 8 + 0.1875 * 12)
                               .epsilon(1e-12));
}

TEST_CASE("bilinear_resize: output range stays within input range") {
  auto gen = testutil::rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Planes in = random_planes(gen, 2, 3 + static_cast<int>(gen() % 6),
                                    3 + static_cast<int>(gen() % 6), -4.0, 4.0);
    const Planes out = adfa::bilinear_resize(in, 17, 13);
    CHECK(out.data.minCoeff() >= in.data.minCoeff() - 1e-12);
    CHECK(out.data.maxCoeff() <= in.data.maxCoeff() + 1e-12);
  }
}

TEST_CASE("fuse_and_embed: channel blocks in tap order plus coordinates") {
  MultiScaleFeatures ms;
  ms.maps.emplace_back(2, 8, 8);
  ms.maps.emplace_back(3, 4, 4);
  ms.maps.emplace_back(4, 2, 2);
  ms.maps[0].data.setConstant(1.0);
  ms.maps[1].data.setConstant(2.0);
  ms.maps[2].data.setConstant(3.0);
  const Planes fused = adfa::fuse_and_embed(ms);
  CHECK(fused.channels() == 2 + 3 + 4 + 2);
  CHECK(fused.height == 8);
  CHECK(fused.width == 8);
  CHECK((fused.data.middleRows(0, 2).array() == 1.0).all());
  CHECK((fused.data.middleRows(2, 3).array() == 2.0).all());
  CHECK((fused.data.middleRows(5, 4).array() == 3.0).all());
  const Planes coords = adfa::coordinate_channels<double>(8, 8);
  CHECK(fused.data.middleRows(9, 2) == coords.data);
}

TEST_CASE("fuse_and_embed: default scale reaches 1794x56x56") {
  MultiScaleFeatures ms;
  ms.maps.emplace_back(256, 56, 56);
  ms.maps.emplace_back(512, 28, 28);
  ms.maps.emplace_back(1024, 14, 14);
  const Planes fused = adfa::fuse_and_embed(ms);
  CHECK(fused.channels() == 1794);
  CHECK(fused.height == 56);
  CHECK(fused.width == 56);
  // coordinate channels are independent of content
  CHECK(fused.data.row(1792).minCoeff() == -1.0);
  CHECK(fused.data.row(1793).maxCoeff() == 1.0);
}

TEST_CASE("seeded backbone: tap shapes follow the strided plan") {
  adfa::SeededConvBackbone full(7, 64, {256, 512, 1024});
  const auto shapes = full.expected_shapes(224, 224);
  REQUIRE(shapes.size() == 3);
  CHECK(shapes[0] == TapShape{256, 56, 56});
  CHECK(shapes[1] == TapShape{512, 28, 28});
  CHECK(shapes[2] == TapShape{1024, 14, 14});
}

TEST_CASE("seeded backbone: deterministic and shape-checked at desk scale") {
  auto gen = testutil::rng(21);
  const Planes img = random_planes(gen, 3, 64, 64);
  adfa::SeededConvBackbone bb(42, 8, {16, 32, 64});

  const auto batch = adfa::extract_features({img, img}, bb);
  REQUIRE(batch.size() == 2);
  CHECK(batch[0].batch_index == 0);
  CHECK(batch[1].batch_index == 1);
  REQUIRE(batch[0].maps.size() == 3);
  CHECK(batch[0].maps[0].channels() == 16);
  CHECK(batch[0].maps[0].height == 16);
  CHECK(batch[0].maps[1].height == 8);
  CHECK(batch[0].maps[2].height == 4);
  for (int t = 0; t < 3; ++t) CHECK(batch[0].maps[t].data == batch[1].maps[t].data);

  adfa::SeededConvBackbone same_seed(42, 8, {16, 32, 64});
  const auto again = same_seed.extract(img);
  for (int t = 0; t < 3; ++t) CHECK(again.maps[t].data == batch[0].maps[t].data);

  adfa::SeededConvBackbone other_seed(43, 8, {16, 32, 64});
  CHECK(other_seed.extract(img).maps[0].data != batch[0].maps[0].data);
  CHECK(other_seed.fingerprint() != bb.fingerprint());
}

TEST_CASE("extract_features: rejects empty batches and shape drift") {
  adfa::SeededConvBackbone bb(42, 4, {8, 16});
  CHECK_THROWS_AS((void)adfa::extract_features({}, bb), adfa::ArgumentError);

  auto gen = testutil::rng(23);
  const Planes img = random_planes(gen, 3, 32, 32);
  CHECK_THROWS_AS((void)adfa::extract_features({img}, LyingExtractor{}), adfa::ConfigError);
}

TEST_CASE("onnx backbone: fixture taps, shapes, and determinism") {
  auto bb = fixture_backbone();
  const auto shapes = bb.expected_shapes(16, 16);
  REQUIRE(shapes.size() == 3);
  CHECK(shapes[0] == TapShape{4, 4, 4});
  CHECK(shapes[1] == TapShape{6, 2, 2});
  CHECK(shapes[2] == TapShape{8, 1, 1});

  auto gen = testutil::rng(31);
  const Planes img = random_planes(gen, 3, 16, 16);
  const auto first = adfa::extract_features({img}, bb);
  const auto second = adfa::extract_features({img}, bb);
  for (int t = 0; t < 3; ++t) CHECK(first[0].maps[t].data == second[0].maps[t].data);

  const Planes fused = adfa::fuse_and_embed(first[0]);
  CHECK(fused.channels() == 4 + 6 + 8 + 2);
  CHECK(fused.height == 4);

  CHECK(bb.fingerprint().rfind("onnx:", 0) == 0);
  CHECK(bb.fingerprint() == fixture_backbone().fingerprint());
  CHECK(bb.source() == adfa::WeightsSource::pretrained);
}

TEST_CASE("onnx backbone: bad paths and bad taps fail loudly") {
  CHECK_THROWS_AS(adfa::OnnxBackbone("/nonexistent/model.onnx", {"a"}, {1}, {4}),
                  adfa::Error);
  adfa::OnnxBackbone wrong_tap(kFixtureDir + "/tiny_backbone.onnx", {"no_such_layer"}, {4}, {4});
  auto gen = testutil::rng(33);
  const Planes img = random_planes(gen, 3, 16, 16);
  CHECK_THROWS_AS((void)wrong_tap.extract(img), adfa::ConfigError);

  adfa::OnnxBackbone wrong_channels(kFixtureDir + "/tiny_backbone.onnx",
                                    {"c1_out", "c2_out", "c3_out"}, {4, 6, 99}, {4, 8, 16});
  CHECK_THROWS_AS((void)adfa::extract_features({img}, wrong_channels), adfa::ConfigError);
}

TEST_CASE("preprocess: constant image maps to the per-channel affine value") {
  Planes raw(1, 300, 200);
  raw.data.setConstant(0.5);
  adfa::PreprocessConfig cfg;
  const Planes out = adfa::preprocess_image(raw, cfg);
  CHECK(out.channels() == 3);
  CHECK(out.height == 224);
  CHECK(out.width == 224);
  for (int c = 0; c < 3; ++c) {
    const double expect =
        (0.5 - cfg.channel_mean[static_cast<size_t>(c)]) / cfg.channel_std[static_cast<size_t>(c)];
    CHECK((out.data.row(c).array() - expect).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("preprocess: center crop offset is (resize - crop) / 2") {
  Planes raw(3, 256, 256);
  raw.data.setZero();
  // marker at (16, 16): with no resize needed, it must land at output (0, 0)
  for (int c = 0; c < 3; ++c) raw.at(c, 16, 16) = 1.0;
  adfa::PreprocessConfig cfg;
  cfg.channel_mean = {0.0, 0.0, 0.0};
  cfg.channel_std = {1.0, 1.0, 1.0};
  const Planes out = adfa::preprocess_image(raw, cfg);
  CHECK(out.at(0, 0, 0) == 1.0);
  CHECK(out.data.sum() == 3.0);
}

TEST_CASE("preprocess: grayscale replicates across channels") {
  auto gen = testutil::rng(39);
  const Planes raw = random_planes(gen, 1, 80, 120, 0.0, 1.0);
  adfa::PreprocessConfig cfg;
  cfg.channel_mean = {0.2, 0.2, 0.2};
  cfg.channel_std = {0.5, 0.5, 0.5};
  const Planes out = adfa::preprocess_image(raw, cfg);
  CHECK(out.data.row(0) == out.data.row(1));
  CHECK(out.data.row(1) == out.data.row(2));
}

TEST_CASE("preprocess: config validation") {
  Planes raw(3, 64, 64);
  adfa::PreprocessConfig cfg;
  cfg.crop_size = 512;
  CHECK_THROWS_AS((void)adfa::preprocess_image(raw, cfg), adfa::ConfigError);
  cfg = adfa::PreprocessConfig{};
  cfg.channel_std = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS((void)adfa::preprocess_image(raw, cfg), adfa::ConfigError);
}

TEST_CASE("image io: png round trip and failure paths") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "adfa_test_io";
  fs::create_directories(dir);

  auto gen = testutil::rng(41);
  Planes img = random_planes(gen, 3, 10, 12, 0.0, 1.0);
  const std::string rgb_path = (dir / "rgb.png").string();
  adfa::save_image(rgb_path, img);
  const Planes back = adfa::load_image(rgb_path);
  CHECK(back.channels() == 3);
  CHECK(back.height == 10);
  CHECK(back.width == 12);
  CHECK((back.data - img.data).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-9);

  Planes gray = random_planes(gen, 1, 6, 6, 0.0, 1.0);
  const std::string gray_path = (dir / "gray.png").string();
  adfa::save_image(gray_path, gray);
  CHECK(adfa::load_image(gray_path).channels() == 1);

  CHECK_THROWS_AS((void)adfa::load_image((dir / "missing.png").string()), adfa::IngestionError);
  fs::remove_all(dir);
}
