// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "adfa/adaptation.hpp"
#include "adfa/descriptor.hpp"

namespace adfa {

/// Everything a trained detector needs at scoring time. Checkpoints hold
/// exactly this bundle plus format framing.
struct Model {
  DescriptorParams params;
  CenterBank bank;
  SoftTopKConfig topk;
  TrainConfig train_echo;
  std::string backbone_fingerprint;
  std::string checkpoint_sha256;  // hash of the container this was loaded from, if any
};

}  // namespace adfa
