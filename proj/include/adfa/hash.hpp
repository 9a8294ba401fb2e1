// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

namespace adfa {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);

/// Streaming digest of a file's bytes. Throws IoError when unreadable.
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace adfa
