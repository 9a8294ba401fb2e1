// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/onnx_backbone.hpp"

#include <opencv2/dnn.hpp>

#include "adfa/hash.hpp"

namespace adfa {

struct OnnxBackbone::Impl {
  mutable cv::dnn::Net net;
  std::vector<std::string> tap_names;
  std::vector<int> tap_channels;
  std::vector<int> divisors;
  std::string fingerprint;
};

OnnxBackbone::OnnxBackbone(const std::string& weights_path, std::vector<std::string> tap_names,
                           std::vector<int> tap_channels, std::vector<int> spatial_divisors)
    : impl_(std::make_unique<Impl>()) {
  if (tap_names.empty() || tap_names.size() != tap_channels.size() ||
      tap_names.size() != spatial_divisors.size())
    throw ConfigError("onnx backbone: tap names, channels, and divisors must align");
  impl_->fingerprint = "onnx:" + sha256_file_hex(weights_path);
  try {
    impl_->net = cv::dnn::readNetFromONNX(weights_path);
  } catch (const cv::Exception& e) {
    throw IngestionError("cannot load onnx weights from " + weights_path + ": " + e.msg);
  }
  // keep intermediate tensor names addressable
  impl_->net.enableFusion(false);
  impl_->tap_names = std::move(tap_names);
  impl_->tap_channels = std::move(tap_channels);
  impl_->divisors = std::move(spatial_divisors);
}

OnnxBackbone::~OnnxBackbone() = default;

MultiScaleFeatures OnnxBackbone::extract(const Planes& image) const {
  if (image.channels() != 3)
    throw ArgumentError("onnx backbone: expected a 3-channel image tensor");
  cv::Mat blob(std::vector<int>{1, 3, image.height, image.width}, CV_32F);
  float* ptr = blob.ptr<float>();
  for (int c = 0; c < 3; ++c)
    for (Eigen::Index t = 0; t < image.positions(); ++t)
      *ptr++ = static_cast<float>(image.data(c, t));

  std::vector<cv::Mat> outs;
  try {
    impl_->net.setInput(blob);
    impl_->net.forward(outs, impl_->tap_names);
  } catch (const cv::Exception& e) {
    throw ConfigError("onnx backbone: inference failed (check tap layer names): " + e.msg);
  }

  MultiScaleFeatures ms;
  for (const auto& m : outs) {
    if (m.dims != 4 || m.size[0] != 1 || m.depth() != CV_32F)
      throw ConfigError("onnx backbone: tap output is not a single-image float map");
    PlanesT<double> p(m.size[1], m.size[2], m.size[3]);
    const float* src = m.ptr<float>();
    for (int c = 0; c < m.size[1]; ++c)
      for (Eigen::Index t = 0; t < p.positions(); ++t) p.data(c, t) = static_cast<double>(*src++);
    ms.maps.push_back(std::move(p));
  }
  return ms;
}

std::vector<TapShape> OnnxBackbone::expected_shapes(int height, int width) const {
  std::vector<TapShape> shapes;
  for (size_t i = 0; i < impl_->tap_channels.size(); ++i)
    shapes.push_back(
        {impl_->tap_channels[i], height / impl_->divisors[i], width / impl_->divisors[i]});
  return shapes;
}

std::string OnnxBackbone::fingerprint() const { return impl_->fingerprint; }

}  // namespace adfa
