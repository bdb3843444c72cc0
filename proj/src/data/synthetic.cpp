#include "freqpad/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "freqpad/data/pipeline.hpp"
#include "freqpad/error.hpp"
#include "freqpad/freq/dct.hpp"
#include "freqpad/freq/filter_bank.hpp"

namespace freqpad::data {

namespace {

float uniform(std::mt19937_64& rng, double lo, double hi) {
  return static_cast<float>(std::uniform_real_distribution<double>(lo, hi)(rng));
}

// Deterministic grid of N(0, 1) noise independent of the standard library's
// normal_distribution implementation.
cv::Mat gaussian_noise(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  cv::Mat out(size, size, CV_32FC1);
  const double two_pi = 2.0 * std::numbers::pi;
  auto* p = out.ptr<float>();
  const int total = size * size;
  for (int i = 0; i < total; i += 2) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    p[i] = static_cast<float>(r * std::cos(two_pi * u2));
    if (i + 1 < total) p[i + 1] = static_cast<float>(r * std::sin(two_pi * u2));
  }
  return out;
}

template <typename Fn>
cv::Mat per_channel_spectrum(const cv::Mat& rgb01, Fn&& fn) {
  const int h = rgb01.rows, w = rgb01.cols;
  const freq::Dct2d<double> plan(h, w);
  std::vector<cv::Mat> channels;
  cv::split(rgb01, channels);
  for (auto& ch : channels) {
    cv::Mat d;
    ch.convertTo(d, CV_64F);
    Grid<double> x(h, w), y(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) x(r, c) = d.at<double>(r, c);
    plan.forward(x.data(), y.data());
    fn(y);
    plan.inverse(y.data(), x.data());
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) ch.at<float>(r, c) = static_cast<float>(x(r, c));
  }
  cv::Mat out;
  cv::merge(channels, out);
  return out;
}

}  // namespace

std::string to_string(AttackMode mode) {
  return mode == AttackMode::LowpassPrint ? "lowpass_print" : "moire_replay";
}

AttackMode parse_attack_mode(const std::string& text) {
  if (text == "lowpass_print") return AttackMode::LowpassPrint;
  if (text == "moire_replay") return AttackMode::MoireReplay;
  throw ValidationError("unknown attack mode '" + text + "'");
}

std::string pai_name(AttackMode mode) { return mode == AttackMode::LowpassPrint ? "print" : "replay"; }

FaceParams draw_face_params(std::uint64_t video_seed, int image_size, double domain_shift) {
  std::mt19937_64 rng(video_seed);
  const float s = static_cast<float>(image_size);
  const float cast = static_cast<float>(0.08 * domain_shift);
  FaceParams f;
  f.skin = {uniform(rng, 0.72, 0.88) + cast, uniform(rng, 0.52, 0.66), uniform(rng, 0.42, 0.56) - cast};
  f.background_top = {uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6)};
  f.background_bottom = {uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6)};
  f.center = {s * uniform(rng, 0.46, 0.54), s * uniform(rng, 0.47, 0.53)};
  f.axes = {s * uniform(rng, 0.27, 0.33), s * uniform(rng, 0.36, 0.42)};
  f.eye_spacing = s * uniform(rng, 0.10, 0.13);
  f.eye_height = s * uniform(rng, 0.08, 0.11);
  f.mouth_height = s * uniform(rng, 0.17, 0.21);
  f.texture_amplitude = uniform(rng, 0.05, 0.07) * static_cast<float>(1.0 + 0.15 * domain_shift);
  f.gain = static_cast<float>(1.0 - 0.12 * domain_shift) * uniform(rng, 0.95, 1.05);
  f.texture_seed = rng();
  return f;
}

cv::Mat render_bona_fide(const FaceParams& face, int image_size, int frame, std::uint64_t frame_seed) {
  const int n = image_size;
  std::mt19937_64 rng(frame_seed);
  const float dx = uniform(rng, -2.0, 2.0), dy = uniform(rng, -2.0, 2.0);
  const float light = uniform(rng, 0.97, 1.03);

  cv::Mat img(n, n, CV_32FC3);
  for (int y = 0; y < n; ++y) {
    const float t = static_cast<float>(y) / (n - 1);
    const cv::Vec3f c = face.background_top * (1 - t) + face.background_bottom * t;
    auto* row = img.ptr<cv::Vec3f>(y);
    for (int x = 0; x < n; ++x) row[x] = c;
  }
  const cv::Point2f center = face.center + cv::Point2f(dx, dy);
  const auto to_scalar = [](const cv::Vec3f& v) { return cv::Scalar(v[0], v[1], v[2]); };
  const auto pt = [](cv::Point2f p) { return cv::Point(cvRound(p.x), cvRound(p.y)); };
  cv::ellipse(img, pt(center), cv::Size(cvRound(face.axes.width), cvRound(face.axes.height)), 0, 0, 360,
              to_scalar(face.skin), cv::FILLED, cv::LINE_AA);
  const cv::Vec3f dark = face.skin * 0.25f;
  const int eye_w = std::max(2, cvRound(face.axes.width * 0.22f)), eye_h = std::max(1, cvRound(face.axes.height * 0.07f));
  for (int side : {-1, 1}) {
    cv::ellipse(img, pt(center + cv::Point2f(side * face.eye_spacing, -face.eye_height)), cv::Size(eye_w, eye_h), 0, 0,
                360, to_scalar(dark), cv::FILLED, cv::LINE_AA);
  }
  cv::ellipse(img, pt(center + cv::Point2f(0, face.mouth_height)),
              cv::Size(cvRound(face.axes.width * 0.35f), std::max(1, cvRound(face.axes.height * 0.06f))), 0, 0, 360,
              cv::Scalar(0.6, 0.2, 0.2), cv::FILLED, cv::LINE_AA);
  cv::line(img, pt(center + cv::Point2f(0, -face.eye_height * 0.3f)), pt(center + cv::Point2f(0, face.mouth_height * 0.55f)),
           to_scalar(face.skin * 0.8f), std::max(1, n / 80), cv::LINE_AA);

  // Fine texture is fixed per subject; sensor noise changes every frame.
  const cv::Mat texture = gaussian_noise(n, face.texture_seed);
  const cv::Mat sensor = gaussian_noise(n, mix_seed(frame_seed, 0x5e5u, static_cast<std::uint64_t>(frame)));
  for (int y = 0; y < n; ++y) {
    auto* row = img.ptr<cv::Vec3f>(y);
    const float* tex = texture.ptr<float>(y);
    const float* sen = sensor.ptr<float>(y);
    for (int x = 0; x < n; ++x) {
      const float grain = face.texture_amplitude * tex[x] + 0.015f * sen[x];
      for (int c = 0; c < 3; ++c) row[x][c] = std::clamp(row[x][c] * face.gain * light + grain, 0.0f, 1.0f);
    }
  }
  return img;
}

cv::Mat apply_lowpass_print(const cv::Mat& rgb01) {
  const int h = rgb01.rows, w = rgb01.cols;
  cv::Mat out = per_channel_spectrum(rgb01, [&](Grid<double>& y) {
    for (int u = 0; u < h; ++u)
      for (int v = 0; v < w; ++v)
        if (freq::band_depth(u, v, h, w) >= 1.0 / 8.0) y(u, v) *= 0.3;
  });
  // Ink gamut: mild contrast compression toward mid-gray.
  out = out * 0.9 + cv::Scalar::all(0.05);
  cv::min(cv::max(out, 0.0), 1.0, out);
  return out;
}

cv::Mat apply_moire_replay(const cv::Mat& rgb01, std::uint64_t video_seed) {
  std::mt19937_64 rng(mix_seed(video_seed, 0x3e91u));
  const double period = uniform(rng, 2.6, 3.6);
  const double theta = uniform(rng, 0.0, std::numbers::pi);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double amplitude = uniform(rng, 0.12, 0.15);
  const double kx = 2.0 * std::numbers::pi * std::cos(theta) / period;
  const double ky = 2.0 * std::numbers::pi * std::sin(theta) / period;
  const cv::Vec3f tint(0.96f, 1.0f, 1.06f);
  cv::Mat out(rgb01.size(), CV_32FC3);
  for (int y = 0; y < rgb01.rows; ++y) {
    const auto* src = rgb01.ptr<cv::Vec3f>(y);
    auto* dst = out.ptr<cv::Vec3f>(y);
    for (int x = 0; x < rgb01.cols; ++x) {
      const float g = static_cast<float>(amplitude * std::sin(kx * x + ky * y + phase));
      for (int c = 0; c < 3; ++c) dst[x][c] = std::clamp(src[x][c] * tint[c] + g, 0.0f, 1.0f);
    }
  }
  return out;
}

std::array<double, 4> band_energies(const cv::Mat& rgb01) {
  const int h = rgb01.rows, w = rgb01.cols;
  std::array<double, 4> energy{};
  per_channel_spectrum(rgb01, [&](Grid<double>& y) {
    for (int u = 0; u < h; ++u)
      for (int v = 0; v < w; ++v) energy[static_cast<int>(freq::band_of(u, v, h, w))] += y(u, v) * y(u, v);
  });
  return energy;
}

SampleManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  require(spec.n_videos_per_class >= 3, "synthetic: need at least 3 videos per class for three splits");
  require(spec.frames_per_video >= 1 && spec.image_size >= 32, "synthetic: bad frame count or image size");
  require(!spec.attack_modes.empty(), "synthetic: no attack modes");
  require(spec.train_fraction > 0 && spec.dev_fraction > 0 && spec.train_fraction + spec.dev_fraction < 1,
          "synthetic: split fractions must leave room for a test split");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "frames", ec);
  require(!ec, "synthetic: cannot create " + (out_dir / "frames").string() + ": " + ec.message());

  const int n = spec.n_videos_per_class;
  const int n_train = std::max(1, static_cast<int>(std::lround(n * spec.train_fraction)));
  const int n_dev = std::max(1, static_cast<int>(std::lround(n * spec.dev_fraction)));
  require(n_train + n_dev < n, "synthetic: split fractions leave no test videos");
  const auto split_of = [&](int i) { return i < n_train ? Split::Train : i < n_train + n_dev ? Split::Dev : Split::Test; };

  SampleManifest manifest;
  manifest.base_dir = out_dir;
  const std::vector<int> png_params{cv::IMWRITE_PNG_COMPRESSION, 1};
  for (int cls = 0; cls < 2; ++cls) {
    const bool bona = cls == 0;
    for (int i = 0; i < n; ++i) {
      char id[128];
      std::snprintf(id, sizeof id, "%s_%s_%04d", spec.dataset_id.c_str(), bona ? "bf" : "atk", i);
      const std::uint64_t video_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(cls + 1), static_cast<std::uint64_t>(i));
      const FaceParams face = draw_face_params(video_seed, spec.image_size, spec.domain_shift);
      const AttackMode mode = spec.attack_modes[i % spec.attack_modes.size()];
      const std::filesystem::path dir = std::filesystem::path("frames") / id;
      std::filesystem::create_directories(out_dir / dir, ec);
      require(!ec, "synthetic: cannot create " + (out_dir / dir).string());
      for (int f = 0; f < spec.frames_per_video; ++f) {
        cv::Mat img = render_bona_fide(face, spec.image_size, f, mix_seed(video_seed, 0xf7a3u, static_cast<std::uint64_t>(f)));
        if (!bona) img = mode == AttackMode::LowpassPrint ? apply_lowpass_print(img) : apply_moire_replay(img, video_seed);
        cv::Mat u8, bgr;
        img.convertTo(u8, CV_8UC3, 255.0);
        cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
        char name[32];
        std::snprintf(name, sizeof name, "%02d.png", f);
        const auto rel = dir / name;
        require(cv::imwrite((out_dir / rel).string(), bgr, png_params), "synthetic: cannot write " + (out_dir / rel).string());
        SampleRecord r;
        r.dataset_id = spec.dataset_id;
        r.video_id = id;
        r.frame_path = rel.generic_string();
        r.label = bona ? Label::BonaFide : Label::Attack;
        r.pai = bona ? "none" : pai_name(mode);
        r.split = split_of(i);
        manifest.records.push_back(std::move(r));
      }
    }
  }
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace freqpad::data
