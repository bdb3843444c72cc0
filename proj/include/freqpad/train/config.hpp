#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqpad/data/pipeline.hpp"
#include "freqpad/losses/losses.hpp"
#include "freqpad/network/model.hpp"

namespace freqpad::train {

inline constexpr int kConfigSchemaVersion = 1;

enum class Monitor { DevLoss, DevAcer };
Monitor parse_monitor(const std::string& text);
std::string to_string(Monitor monitor);

struct OptimConfig {
  double lr0 = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  double lr_decay_gamma = 0.995;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 15;
};

struct DataConfig {
  std::string manifest;
  int frames_per_video = 10;
  bool balance = true;
  bool augment = true;
  data::Normalization normalization;
  std::vector<std::string> datasets;  // empty = all
  std::vector<std::string> pais;      // attack PAIs to keep; empty = all
};

struct TrainConfig {
  int schema_version = kConfigSchemaVersion;
  network::ModelConfig model;
  losses::LossKind loss_kind = losses::LossKind::FocalSmoothL1;
  losses::LossWeights loss_weights;
  OptimConfig optim;
  Monitor monitor = Monitor::DevLoss;
  DataConfig data;
  network::VideoScoreRule video_score_rule = network::VideoScoreRule::Binary;
  int eval_batch_size = 64;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::string preset;  // informational; set by apply_preset

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

// "a.b.c=value"; value parses as JSON when possible, otherwise as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);
TrainConfig resolve_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

// Ablation presets: rgb_bce, rgb_mfd_bce, full_bce, full_flsl.
inline const std::vector<std::string> kPresets{"rgb_bce", "rgb_mfd_bce", "full_bce", "full_flsl"};
void apply_preset(TrainConfig& cfg, const std::string& preset);

// lr0 * gamma^epoch, per epoch.
double lr_at(int epoch, const OptimConfig& optim);

}  // namespace freqpad::train
