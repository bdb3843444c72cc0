#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "freqpad/data/manifest.hpp"
#include "freqpad/data/pipeline.hpp"
#include "freqpad/tensor.hpp"

namespace freqpad::data {

// Keeps sample_frames(T, k) of each video's T frames, in manifest order.
// Repeated indices (T < k) repeat the record.
SampleManifest sample_video_frames(const SampleManifest& manifest, int k);

// Fisher-Yates permutation of [0, n) seeded by (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

struct LoadIssue {
  std::size_t record = 0;
  std::string frame_path;
  std::string message;
};

struct Batch {
  Tensor<float> images;              // N x 3 x S x S, normalized
  std::vector<int> labels;           // 1 = bona fide
  std::vector<std::size_t> records;  // manifest indices that loaded
};

// Loads and optionally augments frames. Each sample's augmentation seed is
// mix_seed(seed, epoch, record index), so batch composition and worker count
// never change a sample's pixels.
class FrameLoader {
 public:
  FrameLoader(const SampleManifest& manifest, int input_size, Normalization norm = {},
              AugmentConfig augment = AugmentConfig::disabled(), std::uint64_t seed = 0);

  const SampleManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.records.size(); }

  // Unreadable frames and invalid crops are appended to `issues` and skipped.
  Batch load(std::span<const std::size_t> indices, int epoch, std::vector<LoadIssue>& issues) const;

 private:
  const SampleManifest& manifest_;
  int input_size_;
  Normalization norm_;
  AugmentConfig augment_;
  std::uint64_t seed_;
};

}  // namespace freqpad::data
