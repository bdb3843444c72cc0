#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "freqpad/data/manifest.hpp"

namespace freqpad::data {

enum class AttackMode { LowpassPrint, MoireReplay };
std::string to_string(AttackMode mode);
AttackMode parse_attack_mode(const std::string& text);
std::string pai_name(AttackMode mode);

struct SyntheticSpec {
  int n_videos_per_class = 200;
  int frames_per_video = 10;
  int image_size = 224;
  std::vector<AttackMode> attack_modes{AttackMode::LowpassPrint, AttackMode::MoireReplay};
  std::uint64_t seed = 0;
  std::string dataset_id = "synth";
  double train_fraction = 0.6;
  double dev_fraction = 0.2;
  // Dataset-level capture conditions: 0 is neutral; other values shift
  // illumination, color cast and texture statistics.
  double domain_shift = 0.0;
};

// Per-video appearance, drawn once from the video seed.
struct FaceParams {
  cv::Vec3f skin, background_top, background_bottom;
  cv::Point2f center;
  cv::Size2f axes;
  float eye_spacing, eye_height, mouth_height;
  float texture_amplitude;
  float gain;
  std::uint64_t texture_seed;
};

FaceParams draw_face_params(std::uint64_t video_seed, int image_size, double domain_shift);

// Bona fide capture: face-like layout, fine skin texture, per-frame sensor
// noise and small pose/illumination jitter. CV_32FC3 RGB in [0, 1].
cv::Mat render_bona_fide(const FaceParams& face, int image_size, int frame, std::uint64_t frame_seed);

// Print: spectrum attenuated to 0.3x amplitude (0.09x energy) at normalized
// anti-diagonal depth >= 1/8, then a gamut compression.
cv::Mat apply_lowpass_print(const cv::Mat& rgb01);

// Replay: additive periodic high-frequency grating plus a screen tint.
cv::Mat apply_moire_replay(const cv::Mat& rgb01, std::uint64_t video_seed);

// Sum over channels of squared DCT coefficients per band (low, mid, high, residual).
std::array<double, 4> band_energies(const cv::Mat& rgb01);

// Writes frames as PNG under <out_dir>/frames/<video_id>/ and the manifest as
// <out_dir>/manifest.csv. Train/dev/test video ids are disjoint.
SampleManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace freqpad::data
