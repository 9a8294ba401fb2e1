// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#include "adfa/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "adfa/hash.hpp"
#include "adfa/image.hpp"
#include "adfa/types.hpp"

namespace fs = std::filesystem;

namespace adfa {

namespace {

bool image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<DatasetFile> scan_split(const fs::path& dir, std::vector<std::string>& warnings) {
  std::vector<DatasetFile> files;
  if (!fs::is_directory(dir)) return files;
  std::vector<fs::path> candidates;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && image_extension(entry.path())) candidates.push_back(entry.path());
  std::sort(candidates.begin(), candidates.end());
  for (const auto& p : candidates) {
    try {
      load_image(p.string());  // readability gate; decoded pixels are not kept
    } catch (const Error& e) {
      warnings.push_back("excluded unreadable image: " + p.string() + " (" + e.what() + ")");
      continue;
    }
    files.push_back({fs::absolute(p).string(), sha256_file_hex(p)});
  }
  return files;
}

}  // namespace

DatasetManifest load_dataset(const std::string& root) {
  if (!fs::is_directory(root))
    throw IngestionError("dataset root '" + root + "' is not a directory");

  DatasetManifest m;
  m.root = fs::absolute(root).string();
  m.train_normal = scan_split(fs::path(root) / "train" / "normal", m.warnings);
  m.test_normal = scan_split(fs::path(root) / "test" / "normal", m.warnings);
  m.test_abnormal = scan_split(fs::path(root) / "test" / "abnormal", m.warnings);

  if (m.train_normal.empty())
    throw IngestionError("dataset '" + root + "' has no readable images in split train/normal");
  if (m.test_normal.empty()) m.warnings.push_back("split test/normal is empty or missing");
  if (m.test_abnormal.empty()) m.warnings.push_back("split test/abnormal is empty or missing");
  return m;
}

std::string manifest_hash(const DatasetManifest& manifest) {
  std::ostringstream os;
  auto emit = [&](const char* split, const std::vector<DatasetFile>& files) {
    for (const auto& f : files)
      os << split << "\t" << fs::path(f.path).filename().string() << "\t" << f.sha256 << "\n";
  };
  emit("train/normal", manifest.train_normal);
  emit("test/normal", manifest.test_normal);
  emit("test/abnormal", manifest.test_abnormal);
  return sha256_hex(os.str());
}

}  // namespace adfa
