// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "adfa/types.hpp"

namespace adfa {

enum class WeightsSource { pretrained, random_seeded };

struct TapShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  bool operator==(const TapShape&) const = default;
};

template <typename S>
struct MultiScaleFeaturesT {
  std::vector<PlanesT<S>> maps;
  int batch_index = 0;
};

using MultiScaleFeatures = MultiScaleFeaturesT<double>;

/// Two channels of pixel coordinates, each scaled linearly to [-1, 1]:
/// channel 0 varies with the row, channel 1 with the column. A dimension of
/// extent 1 maps to 0, the midpoint.
template <typename S>
PlanesT<S> coordinate_channels(int h, int w) {
  if (h < 1 || w < 1) throw ArgumentError("coordinate_channels: extents must be >= 1");
  PlanesT<S> out(2, h, w);
  for (int r = 0; r < h; ++r) {
    const S rv = h == 1 ? S(0) : S(-1) + S(2) * r / (h - 1);
    for (int c = 0; c < w; ++c) {
      const S cv = w == 1 ? S(0) : S(-1) + S(2) * c / (w - 1);
      out.at(0, r, c) = rv;
      out.at(1, r, c) = cv;
    }
  }
  return out;
}

/// Bilinear resize with half-pixel centers (align-corners disabled).
/// Interpolation is written in lerp form, so constant inputs pass through
/// exactly and same-size calls are the identity.
template <typename S>
PlanesT<S> bilinear_resize(const PlanesT<S>& in, int oh, int ow) {
  if (oh < 1 || ow < 1) throw ArgumentError("bilinear_resize: extents must be >= 1");
  const int ih = in.height, iw = in.width;
  PlanesT<S> out(in.channels(), oh, ow);
  const S sy = static_cast<S>(ih) / oh;
  const S sx = static_cast<S>(iw) / ow;
  for (int r = 0; r < oh; ++r) {
    S y = (r + S(0.5)) * sy - S(0.5);
    if (y < S(0)) y = S(0);
    if (y > S(ih - 1)) y = S(ih - 1);
    const int y0 = static_cast<int>(y);
    const int y1 = y0 + 1 < ih ? y0 + 1 : y0;
    const S ty = y - y0;
    for (int c = 0; c < ow; ++c) {
      S x = (c + S(0.5)) * sx - S(0.5);
      if (x < S(0)) x = S(0);
      if (x > S(iw - 1)) x = S(iw - 1);
      const int x0 = static_cast<int>(x);
      const int x1 = x0 + 1 < iw ? x0 + 1 : x0;
      const S tx = x - x0;
      for (int ch = 0; ch < in.channels(); ++ch) {
        const S v00 = in.at(ch, y0, x0), v01 = in.at(ch, y0, x1);
        const S v10 = in.at(ch, y1, x0), v11 = in.at(ch, y1, x1);
        const S top = v00 + tx * (v01 - v00);
        const S bot = v10 + tx * (v11 - v10);
        out.at(ch, r, c) = top + ty * (bot - top);
      }
    }
  }
  return out;
}

/// Upsample every map to the resolution of the first, concatenate along
/// channels in tap order, and append the two coordinate channels.
template <typename S>
PlanesT<S> fuse_and_embed(const MultiScaleFeaturesT<S>& ms) {
  if (ms.maps.empty()) throw ArgumentError("fuse_and_embed: no feature maps");
  const int h = ms.maps.front().height;
  const int w = ms.maps.front().width;
  int total = 2;
  for (const auto& m : ms.maps) total += m.channels();
  PlanesT<S> out(total, h, w);
  int row = 0;
  for (const auto& m : ms.maps) {
    if (m.height == h && m.width == w) {
      out.data.middleRows(row, m.channels()) = m.data;
    } else {
      out.data.middleRows(row, m.channels()) = bilinear_resize(m, h, w).data;
    }
    row += m.channels();
  }
  out.data.middleRows(row, 2) = coordinate_channels<S>(h, w).data;
  return out;
}

/// Frozen feature provider: pretrained weights behind an inference runtime,
/// or a seeded random network for the ablation arm. Implementations must be
/// deterministic and stateless after construction.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual MultiScaleFeatures extract(const Planes& image) const = 0;
  virtual std::vector<TapShape> expected_shapes(int height, int width) const = 0;
  /// Stable identity of the weights, recorded in checkpoints.
  virtual std::string fingerprint() const = 0;
  virtual WeightsSource source() const = 0;
};

/// Run the extractor over a batch and validate every tap against the
/// expected shapes.
inline std::vector<MultiScaleFeatures> extract_features(const std::vector<Planes>& batch,
                                                        const FeatureExtractor& fx) {
  if (batch.empty()) throw ArgumentError("extract_features: empty batch");
  std::vector<MultiScaleFeatures> out;
  out.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto expect = fx.expected_shapes(batch[i].height, batch[i].width);
    MultiScaleFeatures ms = fx.extract(batch[i]);
    ms.batch_index = static_cast<int>(i);
    if (ms.maps.size() != expect.size())
      throw ConfigError("extract_features: tap count disagrees with the expected shapes");
    for (size_t t = 0; t < expect.size(); ++t) {
      const TapShape got{ms.maps[t].channels(), ms.maps[t].height, ms.maps[t].width};
      if (!(got == expect[t]))
        throw ConfigError("extract_features: tap " + std::to_string(t) + " produced " +
                          std::to_string(got.channels) + "x" + std::to_string(got.height) + "x" +
                          std::to_string(got.width) + ", expected " +
                          std::to_string(expect[t].channels) + "x" +
                          std::to_string(expect[t].height) + "x" +
                          std::to_string(expect[t].width));
    }
    out.push_back(std::move(ms));
  }
  return out;
}

namespace detail {

/// 3x3 convolution, stride 2, zero padding 1, via patch-matrix GEMM.
template <typename S>
PlanesT<S> conv3x3_s2(const PlanesT<S>& in, const MatX<S>& weights, const VecX<S>& bias) {
  const int oh = (in.height - 1) / 2 + 1;
  const int ow = (in.width - 1) / 2 + 1;
  const int cin = in.channels();
  MatX<S> patches(static_cast<Eigen::Index>(cin) * 9, static_cast<Eigen::Index>(oh) * ow);
  patches.setZero();
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      const Eigen::Index col = static_cast<Eigen::Index>(r) * ow + c;
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = 2 * r + dy;
        if (sy < 0 || sy >= in.height) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = 2 * c + dx;
          if (sx < 0 || sx >= in.width) continue;
          const Eigen::Index tap = static_cast<Eigen::Index>((dy + 1) * 3 + (dx + 1)) * cin;
          patches.block(tap, col, cin, 1) =
              in.data.col(static_cast<Eigen::Index>(sy) * in.width + sx);
        }
      }
    }
  PlanesT<S> out;
  out.height = oh;
  out.width = ow;
  out.data = weights * patches;
  out.data.colwise() += bias;
  return out;
}

}  // namespace detail

/// Small strided convolutional network with He-normal weights drawn from a
/// recorded seed: a stem halves the resolution, then each stage halves it
/// again and emits a tap, so taps sit at 1/4, 1/8, and 1/16 of the input.
class SeededConvBackbone : public FeatureExtractor {
 public:
  SeededConvBackbone(std::uint64_t seed, int stem_channels, std::vector<int> tap_channels)
      : seed_(seed), stem_channels_(stem_channels), tap_channels_(std::move(tap_channels)) {
    if (stem_channels_ < 1 || tap_channels_.empty())
      throw ConfigError("seeded backbone: channel plan must be nonempty");
    std::mt19937_64 gen(seed_);
    int cin = 3;
    auto make_layer = [&](int cout) {
      std::normal_distribution<double> he(0.0, std::sqrt(2.0 / (9.0 * cin)));
      Mat w(cout, 9 * cin);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = he(gen);
      weights_.push_back(std::move(w));
      biases_.push_back(Vec::Zero(cout));
      cin = cout;
    };
    make_layer(stem_channels_);
    for (int c : tap_channels_) make_layer(c);
  }

  MultiScaleFeatures extract(const Planes& image) const override {
    if (image.channels() != 3)
      throw ArgumentError("seeded backbone: expected a 3-channel image tensor");
    MultiScaleFeatures ms;
    Planes cur = detail::conv3x3_s2(image, weights_[0], biases_[0]);
    cur.data = cur.data.cwiseMax(0.0);
    for (size_t stage = 1; stage < weights_.size(); ++stage) {
      cur = detail::conv3x3_s2(cur, weights_[stage], biases_[stage]);
      cur.data = cur.data.cwiseMax(0.0);
      ms.maps.push_back(cur);
    }
    return ms;
  }

  std::vector<TapShape> expected_shapes(int height, int width) const override {
    std::vector<TapShape> shapes;
    int h = (height - 1) / 2 + 1, w = (width - 1) / 2 + 1;
    for (int c : tap_channels_) {
      h = (h - 1) / 2 + 1;
      w = (w - 1) / 2 + 1;
      shapes.push_back({c, h, w});
    }
    return shapes;
  }

  std::string fingerprint() const override {
    std::string fp = "random_seeded:seed=" + std::to_string(seed_) +
                     ":stem=" + std::to_string(stem_channels_) + ":taps=";
    for (size_t i = 0; i < tap_channels_.size(); ++i)
      fp += (i ? "," : "") + std::to_string(tap_channels_[i]);
    return fp;
  }

  WeightsSource source() const override { return WeightsSource::random_seeded; }

 private:
  std::uint64_t seed_;
  int stem_channels_;
  std::vector<int> tap_channels_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

}  // namespace adfa
