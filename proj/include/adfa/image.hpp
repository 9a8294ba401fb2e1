// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "adfa/types.hpp"

namespace adfa {

enum class ResizeFilter { bilinear, bicubic };

struct PreprocessConfig {
  int resize_edge = 256;
  int crop_size = 224;
  std::array<double, 3> channel_mean{0.485, 0.456, 0.406};
  std::array<double, 3> channel_std{0.229, 0.224, 0.225};
  ResizeFilter resize_filter = ResizeFilter::bilinear;
};

/// Decode an image file to RGB planes scaled to [0, 1]. Grayscale files
/// come back with one channel; an alpha channel is dropped. Unreadable or
/// corrupt files raise an ingestion error naming the path.
Planes load_image(const std::string& path);

/// Resize to resize_edge x resize_edge, center crop to crop_size, replicate
/// grayscale to three channels, and normalize each channel as (v - m) / s.
Planes preprocess_image(const Planes& raw, const PreprocessConfig& cfg);

/// Write planes as an 8-bit image, clamping values to [0, 1]. One channel
/// writes grayscale, three write RGB.
void save_image(const std::string& path, const Planes& img);

}  // namespace adfa
