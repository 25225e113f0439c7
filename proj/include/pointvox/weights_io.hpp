#pragma once

#include <filesystem>
#include <vector>

#include "pointvox/transformer.hpp"

namespace pointvox::io {

// Snapshot = <stem>.bin (flat little-endian float32) + <stem>.json manifest
// listing every tensor's name, shape and byte offset. Values are rounded to
// float32 on save.
void save_weights(const std::filesystem::path& stem, std::vector<AttentionWeights> blocks);
std::vector<AttentionWeights> load_weights(const std::filesystem::path& stem);

}  // namespace pointvox::io
