#include "freqpad/data/dataset.hpp"

#include <map>
#include <random>

#include "freqpad/error.hpp"

namespace freqpad::data {

SampleManifest sample_video_frames(const SampleManifest& manifest, int k) {
  require(k >= 1, "sample_video_frames: k must be positive");
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> frames;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    auto key = std::make_pair(r.dataset_id, r.video_id);
    auto [it, inserted] = frames.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }
  SampleManifest out{manifest.schema_version, manifest.base_dir, {}};
  for (const auto& key : order) {
    const auto& idx = frames.at(key);
    for (int f : sample_frames(static_cast<int>(idx.size()), k)) out.records.push_back(manifest.records[idx[f]]);
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, 0x0de7u, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

FrameLoader::FrameLoader(const SampleManifest& manifest, int input_size, Normalization norm, AugmentConfig augment,
                         std::uint64_t seed)
    : manifest_(manifest), input_size_(input_size), norm_(norm), augment_(augment), seed_(seed) {
  require(input_size >= 1, "FrameLoader: input size must be positive");
}

Batch FrameLoader::load(std::span<const std::size_t> indices, int epoch, std::vector<LoadIssue>& issues) const {
  std::vector<Tensor<float>> parts;
  Batch batch;
  for (std::size_t idx : indices) {
    require(idx < manifest_.records.size(), "FrameLoader: record index out of range");
    const auto& record = manifest_.records[idx];
    cv::Mat img;
    try {
      img = load_and_crop(manifest_, record, input_size_);
    } catch (const std::exception& e) {
      issues.push_back({idx, record.frame_path, e.what()});
      continue;
    }
    img = augment(img, mix_seed(seed_, static_cast<std::uint64_t>(epoch), idx), augment_);
    parts.push_back(to_tensor(img, norm_));
    batch.labels.push_back(label_value(record.label));
    batch.records.push_back(idx);
  }
  if (!parts.empty()) batch.images = stack_samples<float>(parts);
  return batch;
}

}  // namespace freqpad::data
