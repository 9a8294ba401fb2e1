// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "adfa/image.hpp"
#include "adfa/synth.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("adfa_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool bitwise_equal(const adfa::Mat& a, const adfa::Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synth images are deterministic per (seed, tag, index)") {
  adfa::SynthConfig cfg;
  cfg.seed = 5;
  const adfa::Planes a = adfa::synth_image(cfg, 0, 3, false);
  const adfa::Planes b = adfa::synth_image(cfg, 0, 3, false);
  CHECK(bitwise_equal(a.data, b.data));
  CHECK(a.height == cfg.image_size);
  CHECK(a.channels() == 1);

  const adfa::Planes other_index = adfa::synth_image(cfg, 0, 4, false);
  CHECK_FALSE(bitwise_equal(a.data, other_index.data));
  const adfa::Planes other_tag = adfa::synth_image(cfg, 1, 3, false);
  CHECK_FALSE(bitwise_equal(a.data, other_tag.data));
  adfa::SynthConfig cfg2 = cfg;
  cfg2.seed = 6;
  CHECK_FALSE(bitwise_equal(a.data, adfa::synth_image(cfg2, 0, 3, false).data));
}

TEST_CASE("the occluder is the only difference between a pair") {
  adfa::SynthConfig cfg;
  cfg.seed = 11;
  for (int idx = 0; idx < 5; ++idx) {
    adfa::OccluderBox box;
    const adfa::Planes abnormal = adfa::synth_image(cfg, 2, idx, true, &box);
    const adfa::Planes base = adfa::synth_image(cfg, 2, idx, false);
    REQUIRE(box.rows > 0);
    REQUIRE(box.cols > 0);
    REQUIRE(box.row0 + box.rows <= cfg.image_size);
    REQUIRE(box.col0 + box.cols <= cfg.image_size);

    int inside_diffs = 0;
    for (int r = 0; r < cfg.image_size; ++r)
      for (int c = 0; c < cfg.image_size; ++c) {
        const bool inside = r >= box.row0 && r < box.row0 + box.rows && c >= box.col0 &&
                            c < box.col0 + box.cols;
        const double va = abnormal.data(0, r * cfg.image_size + c);
        const double vb = base.data(0, r * cfg.image_size + c);
        if (inside)
          inside_diffs += va != vb;
        else
          CHECK(va == vb);
      }
    CHECK(inside_diffs > 0);
  }
}

TEST_CASE("generation is byte-identical per seed and loads cleanly") {
  TempDir a("synth_a"), b("synth_b");
  adfa::SynthConfig cfg;
  cfg.seed = 3;
  cfg.n_train = 3;
  cfg.n_test_normal = 2;
  cfg.n_test_abnormal = 2;
  cfg.image_size = 32;

  const adfa::DatasetManifest ma = adfa::generate_synthetic(a.path.string(), cfg);
  const adfa::DatasetManifest mb = adfa::generate_synthetic(b.path.string(), cfg);
  CHECK(ma.warnings.empty());
  CHECK(ma.train_normal.size() == 3);
  CHECK(ma.test_normal.size() == 2);
  CHECK(ma.test_abnormal.size() == 2);
  CHECK(adfa::manifest_hash(ma) == adfa::manifest_hash(mb));
  for (size_t i = 0; i < ma.train_normal.size(); ++i)
    CHECK(file_bytes(ma.train_normal[i].path) == file_bytes(mb.train_normal[i].path));
  for (size_t i = 0; i < ma.test_abnormal.size(); ++i)
    CHECK(file_bytes(ma.test_abnormal[i].path) == file_bytes(mb.test_abnormal[i].path));

  adfa::SynthConfig different = cfg;
  different.seed = 4;
  TempDir c("synth_c");
  const adfa::DatasetManifest mc = adfa::generate_synthetic(c.path.string(), different);
  CHECK(adfa::manifest_hash(ma) != adfa::manifest_hash(mc));
}

TEST_CASE("synth argument validation") {
  adfa::SynthConfig cfg;
  cfg.n_train = 0;
  CHECK_THROWS_AS(adfa::generate_synthetic("/tmp/unused", cfg), adfa::ArgumentError);
  adfa::SynthConfig tiny;
  tiny.image_size = 8;
  CHECK_THROWS_AS(adfa::synth_image(tiny, 0, 0, false), adfa::ArgumentError);
}

TEST_CASE("load_dataset re-scan is stable and ignores non-images") {
  TempDir dir("scan");
  adfa::SynthConfig cfg;
  cfg.seed = 9;
  cfg.n_train = 2;
  cfg.n_test_normal = 1;
  cfg.n_test_abnormal = 1;
  cfg.image_size = 32;
  adfa::generate_synthetic(dir.path.string(), cfg);
  {
    std::ofstream f(dir.path / "train" / "normal" / "notes.txt");
    f << "not an image";
  }

  const adfa::DatasetManifest m1 = adfa::load_dataset(dir.path.string());
  const adfa::DatasetManifest m2 = adfa::load_dataset(dir.path.string());
  CHECK(m1.train_normal.size() == 2);
  CHECK(m1.warnings.empty());
  CHECK(adfa::manifest_hash(m1) == adfa::manifest_hash(m2));
  CHECK(fs::path(m1.train_normal[0].path).filename() < fs::path(m1.train_normal[1].path).filename());
  CHECK(m1.train_normal[0].sha256.size() == 64);
}

TEST_CASE("unreadable images are excluded with a warning") {
  TempDir dir("badimg");
  adfa::SynthConfig cfg;
  cfg.seed = 2;
  cfg.n_train = 2;
  cfg.n_test_normal = 1;
  cfg.n_test_abnormal = 1;
  cfg.image_size = 32;
  adfa::generate_synthetic(dir.path.string(), cfg);
  {
    std::ofstream f(dir.path / "train" / "normal" / "corrupt.png", std::ios::binary);
    f << "this is not a png";
  }
  const adfa::DatasetManifest m = adfa::load_dataset(dir.path.string());
  CHECK(m.train_normal.size() == 2);
  REQUIRE(m.warnings.size() == 1);
  CHECK(m.warnings[0].find("corrupt.png") != std::string::npos);
}

TEST_CASE("an empty or missing train split is an ingestion error") {
  TempDir dir("empty");
  fs::create_directories(dir.path / "train" / "normal");
  CHECK_THROWS_AS(adfa::load_dataset(dir.path.string()), adfa::IngestionError);
  CHECK_THROWS_AS(adfa::load_dataset((dir.path / "missing").string()), adfa::IngestionError);
  try {
    adfa::load_dataset(dir.path.string());
  } catch (const adfa::IngestionError& e) {
    CHECK(std::string(e.what()).find("train/normal") != std::string::npos);
  }
}

TEST_CASE("missing test splits load with warnings for training use") {
  TempDir dir("trainonly");
  adfa::SynthConfig cfg;
  cfg.seed = 3;
  cfg.n_train = 2;
  cfg.n_test_normal = 1;
  cfg.n_test_abnormal = 1;
  cfg.image_size = 32;
  adfa::generate_synthetic(dir.path.string(), cfg);
  fs::remove_all(dir.path / "test");
  const adfa::DatasetManifest m = adfa::load_dataset(dir.path.string());
  CHECK(m.train_normal.size() == 2);
  CHECK(m.test_normal.empty());
  CHECK(m.test_abnormal.empty());
  CHECK(m.warnings.size() == 2);
}
