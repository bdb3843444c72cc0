#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "freqpad/network/model.hpp"
#include "freqpad/train/config.hpp"

namespace freqpad::train {

inline constexpr char kCheckpointMagic[8] = {'F', 'Q', 'P', 'A', 'D', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Container layout: 8-byte magic, u32 version, u64 header length, JSON header,
// then little-endian float32 blobs in header order. The header holds the
// resolved config (model, backbone, normalization), a tensor table and
// free-form training metadata; an FNV-1a hash guards the blob.
struct CheckpointMeta {
  TrainConfig config;
  nlohmann::json training;  // epoch, monitor value, ...
};

void save_checkpoint(const std::filesystem::path& path, network::PadModel<float>& model, const TrainConfig& config,
                     const nlohmann::json& training = nlohmann::json::object());

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<network::PadModel<float>> model;
};

// Rebuilds the model from the stored config and restores every parameter and
// buffer. Any missing, extra or mis-shaped tensor is an error.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors whose names and shapes match from a checkpoint into `model`.
// Returns the number of tensors copied.
std::size_t load_matching_weights(const std::filesystem::path& path, network::PadModel<float>& model);

}  // namespace freqpad::train
