#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "segrefine/network.hpp"

namespace segrefine {

// Checkpoint container layout (little-endian):
//   8 bytes   magic "SRCKPT01"
//   u64       metadata length, then UTF-8 JSON metadata
//             {"config": {...}, "iteration": n, "seed": s, "extra": {...}}
//   u64       array count, then per array:
//             u32 name length, name (layer path, e.g. "model/layer1.0.conv1.weight")
//             u8 dtype (0 = f32, 1 = f64, 2 = i64), u32 rank, i64 dims[rank], raw data
// Model parameters and buffers live under "model/"; other prefixes (e.g.
// "optim/") carry auxiliary state.

struct CheckpointMeta {
  RefinerConfig config;
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json config_to_json(const RefinerConfig& config);
RefinerConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const RefinerModel& model,
                     const CheckpointMeta& meta,
                     const std::map<std::string, torch::Tensor>& extra_arrays = {});

struct LoadedCheckpoint {
  CheckpointMeta meta;
  RefinerModel model;
  std::map<std::string, torch::Tensor> extra_arrays;
};

/// Throws IoError for unreadable files and DataFormatError for malformed ones.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segrefine
