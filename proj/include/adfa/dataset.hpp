// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace adfa {

struct DatasetFile {
  std::string path;    // absolute
  std::string sha256;  // content hash
};

/// Scan of the fixed split layout: train/normal, test/normal, test/abnormal.
/// The train split holds only normal images by construction of the layout.
struct DatasetManifest {
  std::string root;
  std::vector<DatasetFile> train_normal;
  std::vector<DatasetFile> test_normal;
  std::vector<DatasetFile> test_abnormal;
  std::vector<std::string> warnings;  // unreadable files, missing optional splits
};

/// Scan `root` for the fixed layout. Files are listed in sorted order with
/// content hashes; unreadable images are excluded with a warning. A missing
/// or empty train/normal split is an ingestion error; missing test splits
/// are tolerated here and checked by the commands that need them.
DatasetManifest load_dataset(const std::string& root);

/// Hash of the manifest content (split names, file names, file hashes).
/// Identical trees produce identical manifest hashes.
std::string manifest_hash(const DatasetManifest& manifest);

}  // namespace adfa
