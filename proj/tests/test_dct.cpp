#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "freqpad/error.hpp"
#include "freqpad/freq/dct.hpp"
#include "support.hpp"

using namespace freqpad;
using freq::dct2;
using freq::idct2;

namespace {

// Direct evaluation of the orthonormal type-II definition.
Grid<double> dct_by_definition(const Grid<double>& x) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  Grid<double> y(h, w);
  const auto alpha = [](int k, int n) { return k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n); };
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      double s = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          s += x(i, j) * std::cos(std::numbers::pi * (2 * i + 1) * u / (2.0 * h)) *
               std::cos(std::numbers::pi * (2 * j + 1) * v / (2.0 * w));
      y(u, v) = alpha(u, h) * alpha(v, w) * s;
    }
  return y;
}

Grid<double> random_grid(int h, int w, std::uint64_t seed) {
  const auto t = check::random_tensor<double>(Shape{1, 1, h, w}, seed);
  return t.plane_map(0, 0);
}

}  // namespace

TEST(Dct, ConstantTwoByTwoConcentratesInDc) {
  const double c = 3.25;
  Grid<double> x = Grid<double>::Constant(2, 2, c);
  const auto y = dct2(x);
  EXPECT_NEAR(y(0, 0), 2.0 * c, 1e-12);
  EXPECT_NEAR(y(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(y(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(y(1, 1), 0.0, 1e-12);
}

TEST(Dct, DcOnlyInverseIsConstantHalf) {
  const double k = -1.75;
  Grid<double> y = Grid<double>::Zero(2, 2);
  y(0, 0) = k;
  const auto x = idct2(y);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(x(i, j), k / 2.0, 1e-12);
}

TEST(Dct, ZeroMapsToZero) {
  EXPECT_EQ(dct2(Grid<double>(Grid<double>::Zero(5, 7))).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(idct2(Grid<double>(Grid<double>::Zero(5, 7))).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dct, MatchesDefinitionOnRectangularGrid) {
  const auto x = random_grid(6, 9, 3);
  EXPECT_LT((dct2(x) - dct_by_definition(x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dct, RoundTripBothDirectionsDouble) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_grid(8, 8, seed);
    EXPECT_LT((idct2(dct2(x)) - x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((dct2(idct2(x)) - x).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Dct, RoundTripSinglePrecision) {
  const auto t = check::random_tensor<float>(Shape{1, 1, 224, 224}, 9);
  const Grid<float> x = t.plane_map(0, 0);
  EXPECT_LT((idct2(dct2(x)) - x).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(Dct, ParsevalEnergyPreserved) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_grid(13, 17, 100 + seed);
    const double ex = x.squaredNorm(), ey = dct2(x).squaredNorm();
    EXPECT_LT(std::abs(ex - ey) / ex, 1e-8);
  }
}

TEST(Dct, InverseIsAdjointOfForward) {
  const freq::Dct2d<double> plan(7, 5);
  const auto x = random_grid(7, 5, 1), y = random_grid(7, 5, 2);
  Grid<double> dx(7, 5), iy(7, 5);
  plan.forward(x.data(), dx.data());
  plan.inverse(y.data(), iy.data());
  EXPECT_NEAR((dx.array() * y.array()).sum(), (x.array() * iy.array()).sum(), 1e-12);
}

TEST(Dct, RejectsNonFiniteAndEmptyInput) {
  Grid<double> x = Grid<double>::Zero(4, 4);
  x(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(dct2(x), ValidationError);
  x(1, 2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(idct2(x), ValidationError);
  EXPECT_THROW(dct2(Grid<double>(0, 0)), ValidationError);
}

TEST(Dct, OneByOneIsIdentity) {
  Grid<double> x(1, 1);
  x(0, 0) = 4.5;
  EXPECT_DOUBLE_EQ(dct2(x)(0, 0), 4.5);
}
