#pragma once

#include <fstream>

#include "frvs/model.hpp"

namespace frvs {

// Checkpoint layout (all little-endian): magic "FRVS", u32 format version,
// u32 variant tag, f32 max_disp, then per parameter in lexicographic name
// order: u32 name length, name bytes, u32 rank, u32 extents, raw f32 payload.
constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& m, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace frvs
