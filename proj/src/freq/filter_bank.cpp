#include "freqpad/freq/filter_bank.hpp"

#include <algorithm>
#include <cmath>

namespace freqpad::freq {

std::string to_string(Band band) {
  switch (band) {
    case Band::Low: return "low";
    case Band::Mid: return "mid";
    case Band::High: return "high";
    case Band::Residual: return "residual";
  }
  return "?";
}

std::string to_string(BandGeometry geometry) {
  return geometry == BandGeometry::AntiDiagonal ? "anti_diagonal" : "area_fraction";
}

BandGeometry parse_band_geometry(const std::string& text) {
  if (text == "anti_diagonal") return BandGeometry::AntiDiagonal;
  if (text == "area_fraction") return BandGeometry::AreaFraction;
  throw ValidationError("unknown band geometry '" + text + "'");
}

double band_depth(int u, int v, int height, int width, BandGeometry geometry) {
  require(height >= 1 && width >= 1, "band_depth: empty plane");
  require(u >= 0 && u < height && v >= 0 && v < width,
          "band_depth: index (" + std::to_string(u) + "," + std::to_string(v) +
              ") outside " + std::to_string(height) + "x" + std::to_string(width));
  if (geometry == BandGeometry::AntiDiagonal) {
    if (height + width == 2) return 0.0;
    return static_cast<double>(u + v) / static_cast<double>(height + width - 2);
  }
  const long diagonal = u + v;
  long below = 0;
  for (int r = 0; r < height; ++r) {
    below += std::clamp<long>(diagonal - r, 0, width);
  }
  return static_cast<double>(below) / (static_cast<double>(height) * width);
}

Band band_of(int u, int v, int height, int width, BandGeometry geometry) {
  const double d = band_depth(u, v, height, width, geometry);
  if (d < 1.0 / 16.0) return Band::Low;
  if (d < 1.0 / 8.0) return Band::Mid;
  if (d < 7.0 / 8.0) return Band::High;
  return Band::Residual;
}

double sigma_norm(double f) { return std::tanh(0.5 * f); }

template <typename T>
FilterBank<T>::FilterBank(int height, int width, BandGeometry geometry)
    : height_(height),
      width_(width),
      geometry_(geometry),
      base_(Shape{1, kBands, height, width}),
      learnable_("mfd.learnable_masks", Tensor<T>(Shape{1, kBands, height, width})) {
  require(height >= 2 && width >= 2, "filter bank needs at least a 2x2 plane");
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) {
      const Band band = band_of(u, v, height, width, geometry);
      if (band != Band::Residual) base_.at(0, static_cast<int>(band), u, v) = T(1);
      base_.at(0, kBands - 1, u, v) = T(1);
    }
  }
}

template <typename T>
Grid<T> FilterBank<T>::combined_filter(int band) const {
  require(band >= 0 && band < kBands, "band index out of range");
  Grid<T> out = base_mask(band);
  const auto learn = learnable_mask(band);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] += static_cast<T>(sigma_norm(static_cast<double>(learn.data()[i])));
  }
  return out;
}

template <typename T>
FilterBank<T> init_filter_bank(int height, int width, std::uint64_t /*seed*/, BandGeometry geometry) {
  return FilterBank<T>(height, width, geometry);
}

template class FilterBank<float>;
template class FilterBank<double>;
template FilterBank<float> init_filter_bank<float>(int, int, std::uint64_t, BandGeometry);
template FilterBank<double> init_filter_bank<double>(int, int, std::uint64_t, BandGeometry);

}  // namespace freqpad::freq
