// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adfa/backbone.hpp"

namespace adfa {

/// Pretrained feature provider backed by an ONNX graph. Taps are named
/// tensors inside the graph; each tap reduces the spatial extent by the
/// paired divisor relative to the network input.
class OnnxBackbone : public FeatureExtractor {
 public:
  OnnxBackbone(const std::string& weights_path, std::vector<std::string> tap_names,
               std::vector<int> tap_channels, std::vector<int> spatial_divisors);
  ~OnnxBackbone() override;

  MultiScaleFeatures extract(const Planes& image) const override;
  std::vector<TapShape> expected_shapes(int height, int width) const override;
  std::string fingerprint() const override;
  WeightsSource source() const override { return WeightsSource::pretrained; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace adfa
