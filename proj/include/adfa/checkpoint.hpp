// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "adfa/config.hpp"
#include "adfa/model.hpp"

namespace adfa {

/// Checkpoint container: magic bytes "ADFA", a little-endian u32 format
/// version, a JSON metadata block (config echo, backbone recipe, enum
/// fields), and named float32 tensors (row-major, little-endian payloads).

struct LoadedCheckpoint {
  Model model;  // checkpoint_sha256 filled with the hash of the file bytes
  BackboneConfig backbone;
  std::string run_config_yaml;
};

/// Write `model` with its backbone recipe and the verbatim config echo.
/// Returns the SHA-256 of the written file. Identical inputs produce
/// byte-identical files.
std::string save_checkpoint(const std::string& path, const Model& model,
                            const BackboneConfig& backbone, const std::string& run_config_yaml);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace adfa
