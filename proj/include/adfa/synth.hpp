// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "adfa/dataset.hpp"
#include "adfa/types.hpp"

namespace adfa {

struct SynthConfig {
  int image_size = 64;
  int n_train = 40;
  int n_test_normal = 20;
  int n_test_abnormal = 20;
  std::uint64_t seed = 0;
};

struct OccluderBox {
  int row0 = 0, col0 = 0, rows = 0, cols = 0;
};

/// Deterministic synthetic image: a striped disk with jittered position and
/// radius on a noise background; `abnormal` stamps a rectangular occluder of
/// contrasting stripe texture on top of the same base image. The base render
/// depends only on (seed, split_tag, index), so the abnormal variant differs
/// from its normal counterpart exactly inside the reported box.
Planes synth_image(const SynthConfig& cfg, int split_tag, int index, bool abnormal,
                   OccluderBox* box = nullptr);

/// Write the fixed split layout under `out_dir` as PNG files and load it
/// back into a manifest. The same seed reproduces byte-identical files.
DatasetManifest generate_synthetic(const std::string& out_dir, const SynthConfig& cfg);

}  // namespace adfa
