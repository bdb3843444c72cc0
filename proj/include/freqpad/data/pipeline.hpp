#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "freqpad/data/manifest.hpp"
#include "freqpad/tensor.hpp"

namespace freqpad::data {

// Segment midpoints floor((i + 0.5) * T / k), i = 0..k-1. Repeats when T < k.
std::vector<int> sample_frames(int total_frames, int k = 10);

// Duplicates minority-class train records round-robin up to the majority
// count (ratio 1:1, well inside [0.9, 1.1]). Dev/test records are untouched.
SampleManifest balance_classes(const SampleManifest& manifest);

struct Normalization {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};
};

// 8-bit image file -> HxWx3 CV_32F RGB in [0, 1].
cv::Mat read_rgb01(const std::filesystem::path& path);

// Reads the frame, applies the crop box (whole frame when absent), resizes
// bilinearly to size x size. Returns HxWx3 CV_32F RGB in [0, 1].
cv::Mat load_and_crop(const SampleManifest& manifest, const SampleRecord& record, int size);
cv::Mat crop_and_resize(const cv::Mat& rgb01, const std::optional<CropBox>& box, int size);

// RGB [0, 1] image -> normalized 1 x 3 x H x W tensor.
Tensor<float> to_tensor(const cv::Mat& rgb01, const Normalization& norm);

struct AugmentConfig {
  double flip_prob = 0.5;
  double rotate_prob = 0.5;
  double cutout_prob = 0.5;
  double channel_shift_prob = 0.5;
  double jitter_prob = 0.5;
  double max_rotation_deg = 15.0;
  int cutout_min = 32;
  int cutout_max = 64;
  double max_channel_shift = 20.0 / 255.0;
  double max_jitter = 0.2;  // brightness, contrast and saturation factors in [1 - j, 1 + j]

  static AugmentConfig disabled();
};

// Horizontal flip, rotation, cutout, RGB channel shift and color jitter, each
// applied independently with its probability. Deterministic in `seed`.
cv::Mat augment(const cv::Mat& rgb01, std::uint64_t seed, const AugmentConfig& cfg = {});

cv::Mat horizontal_flip(const cv::Mat& rgb01);

// Stable per-sample seed mix (splitmix64 over the inputs).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace freqpad::data
