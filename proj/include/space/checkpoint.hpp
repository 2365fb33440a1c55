#pragma once

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <string>

namespace space {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string model;    // s2l | posegen | l2l
  std::string profile;  // desk | paper
  long step = 0;
  nlohmann::json model_config = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
};

// Container layout (little-endian):
//   "SPCK", u32 version, u64 n, n bytes of JSON metadata,
//   u32 tensor count, then per tensor: u32 name length, name, u8 dtype
//   (0 f32, 1 f64, 2 i64), u32 rank, rank x i64 sizes, raw data;
//   u64 m, m bytes of serialized optimizer state (m = 0 when absent).
// Parameters and buffers are stored under their module paths. The file is
// written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const torch::nn::Module& module,
                     torch::optim::Optimizer* optimizer = nullptr);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

// Loads into an already-constructed module with the same structure. Throws
// IoError on a missing or extra tensor or a shape mismatch.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module,
                               torch::optim::Optimizer* optimizer = nullptr);

}  // namespace space
