#include "freqpad/data/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "freqpad/error.hpp"

namespace freqpad::data {

std::vector<int> sample_frames(int total_frames, int k) {
  require(total_frames >= 1 && k >= 1, "sample_frames: total_frames and k must be positive");
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) {
    const long long num = static_cast<long long>(2 * i + 1) * total_frames;
    idx[i] = static_cast<int>(num / (2LL * k));
  }
  return idx;
}

SampleManifest balance_classes(const SampleManifest& manifest) {
  std::vector<std::size_t> bona, attack;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (r.split != Split::Train) continue;
    (r.label == Label::BonaFide ? bona : attack).push_back(i);
  }
  require(!bona.empty() && !attack.empty(), "balance_classes: train split needs both bona fide and attack records");
  SampleManifest out = manifest;
  const auto& minority = bona.size() < attack.size() ? bona : attack;
  const std::size_t majority = std::max(bona.size(), attack.size());
  std::size_t count = minority.size();
  for (std::size_t k = 0; count < majority; ++k, ++count) {
    out.records.push_back(manifest.records[minority[k % minority.size()]]);
  }
  return out;
}

cv::Mat crop_and_resize(const cv::Mat& rgb01, const std::optional<CropBox>& box, int size) {
  require(!rgb01.empty(), "crop_and_resize: empty image");
  require(size > 0, "crop_and_resize: size must be positive");
  cv::Mat region = rgb01;
  if (box) {
    require(box->w > 0 && box->h > 0 && box->x >= 0 && box->y >= 0 && box->x + box->w <= rgb01.cols &&
                box->y + box->h <= rgb01.rows,
            "crop box (" + std::to_string(box->x) + "," + std::to_string(box->y) + "," + std::to_string(box->w) +
                "," + std::to_string(box->h) + ") outside " + std::to_string(rgb01.cols) + "x" +
                std::to_string(rgb01.rows) + " image");
    region = rgb01(cv::Rect(box->x, box->y, box->w, box->h));
  }
  if (region.cols == size && region.rows == size) return region.clone();
  cv::Mat out;
  cv::resize(region, out, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  return out;
}

cv::Mat read_rgb01(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  require(!bgr.empty(), "unreadable image " + path.string());
  cv::Mat rgb, rgb01;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  rgb.convertTo(rgb01, CV_32FC3, 1.0 / 255.0);
  return rgb01;
}

cv::Mat load_and_crop(const SampleManifest& manifest, const SampleRecord& record, int size) {
  return crop_and_resize(read_rgb01(resolve_frame(manifest, record)), record.crop_box, size);
}

Tensor<float> to_tensor(const cv::Mat& rgb01, const Normalization& norm) {
  require(rgb01.type() == CV_32FC3, "to_tensor: expected CV_32FC3");
  Tensor<float> t(Shape{1, 3, rgb01.rows, rgb01.cols});
  for (int y = 0; y < rgb01.rows; ++y) {
    const auto* row = rgb01.ptr<cv::Vec3f>(y);
    for (int x = 0; x < rgb01.cols; ++x)
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = (row[x][c] - norm.mean[c]) / norm.std[c];
  }
  return t;
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.flip_prob = cfg.rotate_prob = cfg.cutout_prob = cfg.channel_shift_prob = cfg.jitter_prob = 0.0;
  return cfg;
}

cv::Mat horizontal_flip(const cv::Mat& rgb01) {
  cv::Mat out;
  cv::flip(rgb01, out, 1);
  return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

cv::Mat augment(const cv::Mat& rgb01, std::uint64_t seed, const AugmentConfig& cfg) {
  require(rgb01.type() == CV_32FC3, "augment: expected CV_32FC3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Every draw happens regardless of which transforms fire, so one transform's
  // probability never shifts the randomness of another.
  const bool flip = unit(rng) < cfg.flip_prob;
  const bool rotate = unit(rng) < cfg.rotate_prob;
  const bool cutout = unit(rng) < cfg.cutout_prob;
  const bool shift = unit(rng) < cfg.channel_shift_prob;
  const bool jitter = unit(rng) < cfg.jitter_prob;
  const double angle = (2.0 * unit(rng) - 1.0) * cfg.max_rotation_deg;
  const double cut_frac = unit(rng), cut_x = unit(rng), cut_y = unit(rng);
  const std::array<double, 3> shifts{(2.0 * unit(rng) - 1.0) * cfg.max_channel_shift,
                                     (2.0 * unit(rng) - 1.0) * cfg.max_channel_shift,
                                     (2.0 * unit(rng) - 1.0) * cfg.max_channel_shift};
  const double brightness = 1.0 + (2.0 * unit(rng) - 1.0) * cfg.max_jitter;
  const double contrast = 1.0 + (2.0 * unit(rng) - 1.0) * cfg.max_jitter;
  const double saturation = 1.0 + (2.0 * unit(rng) - 1.0) * cfg.max_jitter;

  cv::Mat img = rgb01.clone();
  if (flip) img = horizontal_flip(img);
  if (rotate) {
    const cv::Point2f center(0.5f * (img.cols - 1), 0.5f * (img.rows - 1));
    const cv::Mat m = cv::getRotationMatrix2D(center, angle, 1.0);
    cv::Mat rotated;
    cv::warpAffine(img, rotated, m, img.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    img = rotated;
  }
  if (cutout) {
    const int lo = std::min(cfg.cutout_min, std::min(img.cols, img.rows));
    const int hi = std::min(cfg.cutout_max, std::min(img.cols, img.rows));
    const int side = lo + static_cast<int>(cut_frac * (hi - lo + 1) * 0.999999);
    const int x = static_cast<int>(cut_x * (img.cols - side + 1) * 0.999999);
    const int y = static_cast<int>(cut_y * (img.rows - side + 1) * 0.999999);
    img(cv::Rect(x, y, side, side)).setTo(cv::Scalar::all(0.0));
  }
  if (shift) {
    img += cv::Scalar(shifts[0], shifts[1], shifts[2]);
  }
  if (jitter) {
    img *= brightness;
    const double mean = cv::mean(img).val[0] / 3.0 + cv::mean(img).val[1] / 3.0 + cv::mean(img).val[2] / 3.0;
    img = (img - cv::Scalar::all(mean)) * contrast + cv::Scalar::all(mean);
    cv::Mat gray, gray3;
    cv::cvtColor(img, gray, cv::COLOR_RGB2GRAY);
    cv::cvtColor(gray, gray3, cv::COLOR_GRAY2RGB);
    img = gray3 + (img - gray3) * saturation;
  }
  if (shift || jitter) cv::min(cv::max(img, 0.0), 1.0, img);
  return img;
}

}  // namespace freqpad::data
