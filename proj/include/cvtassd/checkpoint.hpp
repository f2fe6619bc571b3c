// SPDX-License-Identifier: Apache-2.0
// Binary checkpoint: "CVTA", u32 version (1), u32 count, then per entry
// u16 name length, UTF-8 name, u8 rank, u32 dims, little-endian f32 payload.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cvtassd/nn.hpp"

namespace cvtassd {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

std::vector<uint8_t> encode_checkpoint(const ParamList& params);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamList& params);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into the matching tensors. Every model tensor must
/// be present with an identical shape.
void load_checkpoint(const std::filesystem::path& path, const ParamList& params);
void apply_checkpoint(const std::vector<CheckpointEntry>& entries, const ParamList& params);

}  // namespace cvtassd
