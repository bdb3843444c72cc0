#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <opencv2/core.hpp>

#include "freqpad/data/manifest.hpp"
#include "freqpad/data/synthetic.hpp"
#include "freqpad/error.hpp"
#include "oracles.hpp"

using namespace freqpad;
using namespace freqpad::data;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Share of spectral energy at anti-diagonal depth >= 1/8, measured with
// OpenCV's DCT rather than the library's.
double high_band_share(const cv::Mat& rgb01) {
  std::vector<cv::Mat> planes;
  cv::split(rgb01, planes);
  double high = 0.0, total = 0.0;
  for (auto& p : planes) {
    cv::Mat coeffs;
    cv::dct(p, coeffs);
    const double depth_norm = rgb01.rows + rgb01.cols - 2;
    for (int u = 0; u < coeffs.rows; ++u)
      for (int v = 0; v < coeffs.cols; ++v) {
        const double e = static_cast<double>(coeffs.at<float>(u, v)) * coeffs.at<float>(u, v);
        if (u + v == 0) continue;
        total += e;
        const double d = (u + v) / depth_norm;
        if (d >= 1.0 / 8 && d < 7.0 / 8) high += e;
      }
  }
  return high / total;
}

double high_band_energy_cv(const cv::Mat& rgb01) {
  std::vector<cv::Mat> planes;
  cv::split(rgb01, planes);
  double high = 0.0;
  for (auto& p : planes) {
    cv::Mat coeffs;
    cv::dct(p, coeffs);
    for (int u = 0; u < coeffs.rows; ++u)
      for (int v = 0; v < coeffs.cols; ++v) {
        const double d = (u + v) / static_cast<double>(rgb01.rows + rgb01.cols - 2);
        if (d >= 1.0 / 8 && d < 7.0 / 8) high += static_cast<double>(coeffs.at<float>(u, v)) * coeffs.at<float>(u, v);
      }
  }
  return high;
}

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_videos_per_class = 10;
  spec.frames_per_video = 2;
  spec.image_size = 32;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST(Synthetic, SameSpecGivesByteIdenticalOutput) {
  const fs::path root = fs::temp_directory_path() / "freqpad_test_synthetic_det";
  fs::remove_all(root);
  const auto a = generate_synthetic(small_spec(5), root / "a");
  const auto b = generate_synthetic(small_spec(5), root / "b");
  EXPECT_EQ(slurp(root / "a" / "manifest.csv"), slurp(root / "b" / "manifest.csv"));
  ASSERT_EQ(a.records.size(), 40u);
  for (const auto& r : a.records)
    EXPECT_EQ(slurp(root / "a" / r.frame_path), slurp(root / "b" / r.frame_path)) << r.frame_path;
  const auto c = generate_synthetic(small_spec(6), root / "c");
  EXPECT_NE(slurp(root / "a" / a.records[0].frame_path), slurp(root / "c" / c.records[0].frame_path));
  EXPECT_TRUE(validate_manifest(read_manifest(root / "a" / "manifest.csv"), true).empty());
}

TEST(Synthetic, SplitsAreDisjointAndClassesBalanced) {
  const fs::path root = fs::temp_directory_path() / "freqpad_test_synthetic_split";
  fs::remove_all(root);
  const auto m = generate_synthetic(small_spec(1), root);
  std::map<Split, std::set<std::string>> ids;
  std::map<std::pair<Split, Label>, int> per_split;
  std::map<std::string, int> pai_count;
  for (const auto& r : m.records) {
    ids[r.split].insert(r.video_id);
    per_split[{r.split, r.label}]++;
    if (r.label == Label::Attack) pai_count[r.pai]++;
  }
  for (Split s : {Split::Train, Split::Dev, Split::Test})
    for (Split t : {Split::Train, Split::Dev, Split::Test}) {
      if (s == t) continue;
      for (const auto& id : ids[s]) EXPECT_FALSE(ids[t].count(id)) << id;
    }
  for (Split s : {Split::Train, Split::Dev, Split::Test}) {
    const int bona = per_split[{s, Label::BonaFide}], attack = per_split[{s, Label::Attack}];
    EXPECT_GT(bona, 0);
    EXPECT_EQ(bona, attack);
  }
  EXPECT_EQ(pai_count["print"], pai_count["replay"]);
}

TEST(Synthetic, PrintKeepsAtMostThirtyPercentOfHighBandEnergy) {
  for (int size : {64, 224})
    for (double shift : {-1.0, 0.0, 1.5})
      for (std::uint64_t v = 0; v < 6; ++v) {
        const auto face = draw_face_params(1000 + v, size, shift);
        const cv::Mat bona = render_bona_fide(face, size, 0, 7 + v);
        const cv::Mat print = apply_lowpass_print(bona);
        const double ratio = high_band_energy_cv(print) / high_band_energy_cv(bona);
        EXPECT_LE(ratio, 0.3) << size << " " << shift << " " << v;
        EXPECT_NEAR(band_energies(print)[2] / band_energies(bona)[2], ratio, 1e-3);
      }
}

TEST(Synthetic, AttacksAreSeparableByHighBandShare) {
  for (double shift : {-1.0, 0.0, 1.0}) {
    std::vector<eval::ScoreRecord> print_set, replay_set;
    for (std::uint64_t v = 0; v < 40; ++v) {
      const auto face = draw_face_params(50 + v, 64, shift);
      const cv::Mat bona = render_bona_fide(face, 64, static_cast<int>(v % 4), 3 * v);
      const double rb = high_band_share(bona);
      const auto attack_face = draw_face_params(5000 + v, 64, shift);
      const cv::Mat source = render_bona_fide(attack_face, 64, 0, 11 * v);
      const double rp = high_band_share(apply_lowpass_print(source));
      const double rr = high_band_share(apply_moire_replay(source, 77 + v));
      // Print: more high band means more bona fide. Replay: the opposite.
      print_set.push_back({"b", rb, Label::BonaFide, "none", "s"});
      print_set.push_back({"p", rp, Label::Attack, "print", "s"});
      replay_set.push_back({"b", -rb, Label::BonaFide, "none", "s"});
      replay_set.push_back({"r", -rr, Label::Attack, "replay", "s"});
    }
    EXPECT_GE(check::auc_by_pairs(print_set), 0.99) << "shift " << shift;
    EXPECT_GE(check::auc_by_pairs(replay_set), 0.99) << "shift " << shift;
  }
}

TEST(Synthetic, ModeNamesAndValidation) {
  EXPECT_EQ(parse_attack_mode(to_string(AttackMode::LowpassPrint)), AttackMode::LowpassPrint);
  EXPECT_EQ(parse_attack_mode(to_string(AttackMode::MoireReplay)), AttackMode::MoireReplay);
  EXPECT_EQ(pai_name(AttackMode::MoireReplay), "replay");
  EXPECT_THROW(parse_attack_mode("mask"), ValidationError);
  SyntheticSpec bad = small_spec(0);
  bad.n_videos_per_class = 0;
  EXPECT_THROW(generate_synthetic(bad, fs::temp_directory_path() / "freqpad_test_synthetic_bad"), ValidationError);
}
