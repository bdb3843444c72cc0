#pragma once

#include <cstdint>
#include <string>

#include "freqpad/nn/layer.hpp"
#include "freqpad/tensor.hpp"

namespace freqpad::freq {

enum class Band { Low = 0, Mid = 1, High = 2, Residual = 3 };

// How "fraction of the spectrum" maps onto the 2-D DCT plane.
//  AntiDiagonal: depth d = (u + v) / (H + W - 2).
//  AreaFraction: d = share of coefficients lying on strictly lower anti-diagonals.
enum class BandGeometry { AntiDiagonal, AreaFraction };

std::string to_string(Band band);
std::string to_string(BandGeometry geometry);
BandGeometry parse_band_geometry(const std::string& text);

// Normalized depth of coefficient (u, v) in [0, 1].
double band_depth(int u, int v, int height, int width,
                  BandGeometry geometry = BandGeometry::AntiDiagonal);

// low: d < 1/16, mid: 1/16 <= d < 1/8, high: 1/8 <= d < 7/8, residual: d >= 7/8.
Band band_of(int u, int v, int height, int width,
             BandGeometry geometry = BandGeometry::AntiDiagonal);

// (1 - e^-f) / (1 + e^-f), i.e. tanh(f / 2).
double sigma_norm(double f);

// Fixed binary base masks plus trainable additive masks over the DCT plane.
// Band i filters with base_i + sigma_norm(learnable_i); the combined value is
// never clamped.
template <typename T>
class FilterBank {
 public:
  static constexpr int kBands = 4;

  FilterBank(int height, int width, BandGeometry geometry = BandGeometry::AntiDiagonal);

  int height() const { return height_; }
  int width() const { return width_; }
  int n_bands() const { return kBands; }
  BandGeometry geometry() const { return geometry_; }

  // 1 x kBands x H x W. Entries are exactly 0 or 1.
  const Tensor<T>& base_masks() const { return base_; }
  ConstGridMap<T> base_mask(int band) const { return base_.plane_map(0, band); }

  // 1 x kBands x H x W trainable grid, unbounded.
  nn::Parameter<T>& learnable() { return learnable_; }
  const nn::Parameter<T>& learnable() const { return learnable_; }
  ConstGridMap<T> learnable_mask(int band) const { return learnable_.value.plane_map(0, band); }

  Grid<T> combined_filter(int band) const;

 private:
  int height_;
  int width_;
  BandGeometry geometry_;
  Tensor<T> base_;
  nn::Parameter<T> learnable_;
};

// Base masks from band_of; learnable masks start at zero for every seed, so the
// initial combined filter equals the base filter. The seed is accepted for
// interface stability with randomized initializers.
template <typename T>
FilterBank<T> init_filter_bank(int height, int width, std::uint64_t seed,
                               BandGeometry geometry = BandGeometry::AntiDiagonal);

}  // namespace freqpad::freq
