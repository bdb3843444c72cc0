#include <gtest/gtest.h>

#include <cmath>

#include "freqpad/error.hpp"
#include "freqpad/freq/filter_bank.hpp"

using namespace freqpad;
using freq::Band;
using freq::band_of;

TEST(BandOf, CornerAndDiagonalCases) {
  EXPECT_EQ(band_of(0, 0, 224, 224), Band::Low);
  EXPECT_EQ(band_of(223, 223, 224, 224), Band::Residual);
  // d = 28 / 446 ~ 0.0628, just past 1/16.
  EXPECT_EQ(band_of(14, 14, 224, 224), Band::Mid);
  EXPECT_EQ(band_of(13, 14, 224, 224), Band::Low);
}

TEST(BandOf, BoundariesAreHalfOpen) {
  // H + W - 2 = 32: depth k / 32 lands exactly on 1/16, 1/8 and 7/8 at k = 2, 4, 28.
  EXPECT_EQ(band_of(1, 0, 17, 17), Band::Low);
  EXPECT_EQ(band_of(1, 1, 17, 17), Band::Mid);
  EXPECT_EQ(band_of(2, 1, 17, 17), Band::Mid);
  EXPECT_EQ(band_of(2, 2, 17, 17), Band::High);
  EXPECT_EQ(band_of(14, 13, 17, 17), Band::High);
  EXPECT_EQ(band_of(14, 14, 17, 17), Band::Residual);
}

TEST(BandOf, RejectsOutOfRangeIndices) {
  EXPECT_THROW(band_of(-1, 0, 8, 8), ValidationError);
  EXPECT_THROW(band_of(0, 8, 8, 8), ValidationError);
  EXPECT_THROW(band_of(0, 0, 0, 8), ValidationError);
}

TEST(BandOf, SingleCoefficientGridIsLow) { EXPECT_EQ(band_of(0, 0, 1, 1), Band::Low); }

TEST(BandOf, AreaFractionGeometryCountsLowerDiagonals) {
  using freq::BandGeometry;
  // The DC coefficient has no lower diagonal; depth grows with the covered area.
  EXPECT_EQ(freq::band_depth(0, 0, 64, 64, BandGeometry::AreaFraction), 0.0);
  double prev = -1.0;
  for (int k = 0; k < 127; ++k) {
    const double d = freq::band_depth(k < 64 ? k : 63, k < 64 ? 0 : k - 63, 64, 64, BandGeometry::AreaFraction);
    EXPECT_GT(d, prev);
    EXPECT_LT(d, 1.0);
    prev = d;
  }
  // Area-based low band is wider in diagonals than the depth-based one.
  int low_depth = 0, low_area = 0;
  for (int u = 0; u < 64; ++u)
    for (int v = 0; v < 64; ++v) {
      low_depth += band_of(u, v, 64, 64) == Band::Low;
      low_area += band_of(u, v, 64, 64, BandGeometry::AreaFraction) == Band::Low;
    }
  EXPECT_GT(low_area, low_depth);
  EXPECT_LE(low_area, 64 * 64 / 16 + 64);
}

TEST(SigmaNorm, ClosedFormValues) {
  EXPECT_EQ(freq::sigma_norm(0.0), 0.0);
  EXPECT_NEAR(freq::sigma_norm(std::log(3.0)), 0.5, 1e-15);
  EXPECT_NEAR(freq::sigma_norm(-std::log(3.0)), -0.5, 1e-15);
}

TEST(SigmaNorm, OddBoundedIncreasing) {
  double prev = -1.0;
  for (double f = -30.0; f <= 30.0; f += 0.25) {
    const double s = freq::sigma_norm(f);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_DOUBLE_EQ(s, -freq::sigma_norm(-f));
    if (std::abs(f) < 15) {
      EXPECT_GT(s, prev);
      EXPECT_GT(s, -1.0);
      EXPECT_LT(s, 1.0);
    }
    prev = s;
  }
}

TEST(FilterBank, BaseMasksPartitionTheSpectrum) {
  const auto bank = freq::init_filter_bank<double>(224, 224, 7);
  double all_ones = 0.0;
  for (int u = 0; u < 224; ++u)
    for (int v = 0; v < 224; ++v) {
      double sum123 = 0.0;
      for (int b = 0; b < 4; ++b) {
        const double m = bank.base_mask(b)(u, v);
        EXPECT_TRUE(m == 0.0 || m == 1.0);
        if (b < 3) sum123 += m;
      }
      EXPECT_EQ(sum123, band_of(u, v, 224, 224) == Band::Residual ? 0.0 : 1.0);
      all_ones += bank.base_mask(3)(u, v);
    }
  EXPECT_EQ(all_ones, 224.0 * 224.0);
}

TEST(FilterBank, LearnableMasksStartAtZeroForAnySeed) {
  for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
    auto bank = freq::init_filter_bank<float>(32, 32, seed);
    EXPECT_EQ(bank.learnable().value.shape(), (Shape{1, 4, 32, 32}));
    for (std::size_t i = 0; i < bank.learnable().value.size(); ++i) EXPECT_EQ(bank.learnable().value[i], 0.0f);
    for (int b = 0; b < 4; ++b) EXPECT_EQ(bank.combined_filter(b), Grid<float>(bank.base_mask(b)));
  }
}

TEST(FilterBank, CombinedFilterStaysWithinOneOfBaseAndIsNotClamped) {
  auto bank = freq::init_filter_bank<double>(16, 16, 0);
  auto& w = bank.learnable().value;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (i % 2 ? 1.0 : -1.0) * (0.5 + static_cast<double>(i % 7));
  bool below_zero = false, above_one = false;
  for (int b = 0; b < 4; ++b) {
    const auto f = bank.combined_filter(b);
    const auto base = bank.base_mask(b);
    for (int u = 0; u < 16; ++u)
      for (int v = 0; v < 16; ++v) {
        EXPECT_GT(f(u, v), base(u, v) - 1.0);
        EXPECT_LT(f(u, v), base(u, v) + 1.0);
        below_zero |= f(u, v) < 0.0;
        above_one |= f(u, v) > 1.0;
      }
  }
  EXPECT_TRUE(below_zero);
  EXPECT_TRUE(above_one);
}

TEST(FilterBank, OnlyLearnableMasksAreParameters) {
  auto bank = freq::init_filter_bank<float>(8, 8, 0);
  EXPECT_EQ(bank.learnable().name, "mfd.learnable_masks");
  EXPECT_THROW(freq::init_filter_bank<float>(1, 8, 0), ValidationError);
}

TEST(FilterBank, GeometryNamesRoundTrip) {
  for (auto g : {freq::BandGeometry::AntiDiagonal, freq::BandGeometry::AreaFraction})
    EXPECT_EQ(freq::parse_band_geometry(freq::to_string(g)), g);
  EXPECT_THROW(freq::parse_band_geometry("radial"), ValidationError);
}
