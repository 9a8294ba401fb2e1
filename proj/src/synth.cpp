// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "adfa/image.hpp"

namespace fs = std::filesystem;

namespace adfa {

namespace {

constexpr double kPi = 3.14159265358979323846;

// generator palette, calibrated once against the desk-scale acceptance run
constexpr double kBackgroundNoise = 0.10;  // peak-to-peak around the per-image base level
constexpr double kStripeContrast = 0.20;
constexpr double kStripeNoise = 0.06;
constexpr double kDiskRadiusLo = 0.24, kDiskRadiusHi = 0.34;   // of image size
constexpr double kStripeFreqLo = 5.0, kStripeFreqHi = 8.0;     // cycles per image
constexpr double kOccluderSideLo = 0.16, kOccluderSideHi = 0.26;
constexpr double kOccluderFreqLo = 11.0, kOccluderFreqHi = 15.0;

std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct SynthRng {
  std::mt19937_64 g;
  explicit SynthRng(std::uint64_t s) : g(s) {}
  // fixed-width mapping so streams do not depend on distribution internals
  double uniform() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

}  // namespace

Planes synth_image(const SynthConfig& cfg, int split_tag, int index, bool abnormal,
                   OccluderBox* box) {
  if (cfg.image_size < 16) throw ArgumentError("synth_image: image_size must be at least 16");
  const int n = cfg.image_size;
  SynthRng rng(mix(cfg.seed ^ mix(static_cast<std::uint64_t>(split_tag) ^
                                  mix(static_cast<std::uint64_t>(index)))));

  Planes img;
  img.height = n;
  img.width = n;
  img.data = Mat(1, n * n);

  const double base = 0.5 + 0.08 * (rng.uniform() - 0.5);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      img.data(0, r * n + c) = base + kBackgroundNoise * (rng.uniform() - 0.5);

  const double cy = n / 2.0 + (rng.uniform() - 0.5) * n / 4.0;
  const double cx = n / 2.0 + (rng.uniform() - 0.5) * n / 4.0;
  const double radius = rng.uniform(kDiskRadiusLo, kDiskRadiusHi) * n;
  const double theta = rng.uniform(0.0, kPi);
  const double freq = rng.uniform(kStripeFreqLo, kStripeFreqHi);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double dir_y = std::sin(theta), dir_x = std::cos(theta);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double dy = r - cy, dx = c - cx;
      if (dy * dy + dx * dx > radius * radius) continue;
      const double stripe =
          std::sin(2.0 * kPi * freq * (dx * dir_x + dy * dir_y) / n + phase);
      img.data(0, r * n + c) =
          0.5 + kStripeContrast * stripe + kStripeNoise * (rng.uniform() - 0.5);
    }

  OccluderBox rect;
  if (abnormal) {
    const double side_h = rng.uniform(kOccluderSideLo, kOccluderSideHi) * n;
    const double side_w = rng.uniform(kOccluderSideLo, kOccluderSideHi) * n;
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const double rad = rng.uniform(0.0, 0.5 * radius);
    const double oy = cy + rad * std::sin(ang);
    const double ox = cx + rad * std::cos(ang);
    rect.row0 = std::clamp(static_cast<int>(std::lround(oy - side_h / 2.0)), 0, n - 1);
    rect.col0 = std::clamp(static_cast<int>(std::lround(ox - side_w / 2.0)), 0, n - 1);
    const int row1 = std::clamp(static_cast<int>(std::lround(oy + side_h / 2.0)), rect.row0 + 1, n);
    const int col1 = std::clamp(static_cast<int>(std::lround(ox + side_w / 2.0)), rect.col0 + 1, n);
    rect.rows = row1 - rect.row0;
    rect.cols = col1 - rect.col0;

    const double theta2 = theta + kPi / 2.0 + rng.uniform(-0.2, 0.2);
    const double freq2 = rng.uniform(kOccluderFreqLo, kOccluderFreqHi);
    const double phase2 = rng.uniform(0.0, 2.0 * kPi);
    const double dy2 = std::sin(theta2), dx2 = std::cos(theta2);
    for (int r = rect.row0; r < rect.row0 + rect.rows; ++r)
      for (int c = rect.col0; c < rect.col0 + rect.cols; ++c) {
        const double stripe = std::sin(2.0 * kPi * freq2 * (c * dx2 + r * dy2) / n + phase2);
        img.data(0, r * n + c) =
            0.5 + kStripeContrast * stripe + kStripeNoise * (rng.uniform() - 0.5);
      }
  }
  if (box) *box = rect;
  return img;
}

DatasetManifest generate_synthetic(const std::string& out_dir, const SynthConfig& cfg) {
  if (cfg.n_train < 1 || cfg.n_test_normal < 1 || cfg.n_test_abnormal < 1)
    throw ArgumentError("generate_synthetic: every split count must be at least 1");

  const fs::path root(out_dir);
  const struct {
    const char* dir;
    const char* stem;
    int tag;
    int count;
    bool abnormal;
  } splits[] = {
      {"train/normal", "train", 0, cfg.n_train, false},
      {"test/normal", "normal", 1, cfg.n_test_normal, false},
      {"test/abnormal", "abnormal", 2, cfg.n_test_abnormal, true},
  };
  for (const auto& split : splits) {
    const fs::path dir = root / split.dir;
    fs::create_directories(dir);
    for (int i = 0; i < split.count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.png", split.stem, i);
      save_image((dir / name).string(), synth_image(cfg, split.tag, i, split.abnormal));
    }
  }
  return load_dataset(out_dir);
}

}  // namespace adfa
