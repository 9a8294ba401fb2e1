// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace adfa {

namespace {

Planes planes_from_cv(const cv::Mat& img) {
  Planes out(img.channels(), img.rows, img.cols);
  std::vector<cv::Mat> split;
  cv::split(img, split);
  for (int c = 0; c < img.channels(); ++c)
    for (int r = 0; r < img.rows; ++r)
      for (int col = 0; col < img.cols; ++col) out.at(c, r, col) = split[c].at<double>(r, col);
  return out;
}

cv::Mat cv_from_planes(const Planes& p) {
  std::vector<cv::Mat> split;
  for (int c = 0; c < p.channels(); ++c) {
    cv::Mat plane(p.height, p.width, CV_64F);
    for (int r = 0; r < p.height; ++r)
      for (int col = 0; col < p.width; ++col) plane.at<double>(r, col) = p.at(c, r, col);
    split.push_back(plane);
  }
  cv::Mat merged;
  cv::merge(split, merged);
  return merged;
}

}  // namespace

Planes load_image(const std::string& path) {
  cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IngestionError("cannot decode image: " + path);

  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw IngestionError("unsupported pixel depth in " + path);
  }
  if (raw.channels() == 4) cv::cvtColor(raw, raw, cv::COLOR_BGRA2BGR);
  if (raw.channels() == 3) cv::cvtColor(raw, raw, cv::COLOR_BGR2RGB);
  if (raw.channels() != 1 && raw.channels() != 3)
    throw IngestionError("unsupported channel count in " + path);

  cv::Mat scaled;
  raw.convertTo(scaled, CV_64F, scale);
  return planes_from_cv(scaled);
}

Planes preprocess_image(const Planes& raw, const PreprocessConfig& cfg) {
  if (raw.height < 1 || raw.width < 1 || raw.channels() < 1)
    throw IngestionError("preprocess_image: empty input");
  if (cfg.crop_size > cfg.resize_edge)
    throw ConfigError("preprocess_image: crop_size exceeds resize_edge");
  for (double s : cfg.channel_std)
    if (!(s > 0)) throw ConfigError("preprocess_image: channel_std must be positive");

  // three channels before normalization; grayscale replicates
  Planes rgb;
  if (raw.channels() == 3) {
    rgb = raw;
  } else if (raw.channels() == 1) {
    rgb = Planes(3, raw.height, raw.width);
    for (int c = 0; c < 3; ++c) rgb.data.row(c) = raw.data.row(0);
  } else {
    throw IngestionError("preprocess_image: expected 1 or 3 channels");
  }

  Planes resized;
  if (rgb.height == cfg.resize_edge && rgb.width == cfg.resize_edge) {
    resized = rgb;
  } else {
    cv::Mat src = cv_from_planes(rgb);
    cv::Mat dst;
    const int interp =
        cfg.resize_filter == ResizeFilter::bilinear ? cv::INTER_LINEAR : cv::INTER_CUBIC;
    cv::resize(src, dst, cv::Size(cfg.resize_edge, cfg.resize_edge), 0, 0, interp);
    resized = planes_from_cv(dst);
  }

  const int off = (cfg.resize_edge - cfg.crop_size) / 2;
  Planes out(3, cfg.crop_size, cfg.crop_size);
  for (int c = 0; c < 3; ++c) {
    const double m = cfg.channel_mean[static_cast<size_t>(c)];
    const double s = cfg.channel_std[static_cast<size_t>(c)];
    for (int r = 0; r < cfg.crop_size; ++r)
      for (int col = 0; col < cfg.crop_size; ++col)
        out.at(c, r, col) = (resized.at(c, r + off, col + off) - m) / s;
  }
  return out;
}

void save_image(const std::string& path, const Planes& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw ArgumentError("save_image: expected 1 or 3 channels");
  cv::Mat merged = cv_from_planes(img);
  cv::Mat clamped;
  cv::min(cv::max(merged, 0.0), 1.0, clamped);
  cv::Mat bytes;
  clamped.convertTo(bytes, img.channels() == 1 ? CV_8UC1 : CV_8UC3, 255.0);
  if (img.channels() == 3) cv::cvtColor(bytes, bytes, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path, bytes)) throw IoError("cannot write image: " + path);
}

}  // namespace adfa
