#pragma once

#include <array>

#include "freqpad/freq/dct.hpp"
#include "freqpad/freq/filter_bank.hpp"
#include "freqpad/nn/layer.hpp"

namespace freqpad::freq {

// Band-filtered image components. Channel index = band * C_in + input_channel
// (band-major), so an RGB input yields 12 channels.
template <typename T>
struct DecomposedStack {
  Tensor<T> components;  // N x (4 * C_in) x H x W
  Shape source_shape;    // N x C_in x H x W
};

// C_i = idct2(dct2(x) * (base_i + sigma_norm(learnable_i))) per channel and band.
template <typename T>
DecomposedStack<T> decompose(const Tensor<T>& image, const FilterBank<T>& bank);

// Trainable decomposition front-end. Owns the filter bank; gradients flow to
// the learnable masks and, when enabled, to the input image.
template <typename T>
class MfdLayer : public nn::Layer<T> {
 public:
  explicit MfdLayer(FilterBank<T> bank);

  Tensor<T> forward(const Tensor<T>& input, nn::Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override;

  FilterBank<T>& bank() { return bank_; }
  const FilterBank<T>& bank() const { return bank_; }

 private:
  FilterBank<T> bank_;
  Dct2d<T> plan_;
  Tensor<T> coeffs_;                    // dct2 of the last input
  std::array<Grid<T>, FilterBank<T>::kBands> filters_;  // combined filters of the last forward
};

}  // namespace freqpad::freq
