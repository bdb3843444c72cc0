#pragma once

#include <array>
#include <optional>
#include <string>

#include "freqpad/nn/layers.hpp"

namespace freqpad::network {

// Stage contract: four taps S1..S4 with strictly decreasing spatial size.
// S1 is the output of the first (downsampling) convolution block, S2..S4 the
// outputs of the following residual stages. Spatial sizes are input / 4, 8, 16, 32.
struct BackboneSpec {
  std::string name = "tiny";  // "tiny" | "resnet50"
  std::array<int, 4> stage_channels{16, 32, 64, 128};
  std::array<int, 4> stage_spatial{56, 28, 14, 7};
  std::optional<std::string> pretrained_weights_path;

  static BackboneSpec tiny(int input_size = 224);
  static BackboneSpec resnet50(int input_size = 224);
  static BackboneSpec named(const std::string& name, int input_size = 224);
};

template <typename T>
class Backbone {
 public:
  using Taps = std::array<Tensor<T>, 4>;

  // `input_grad` controls whether backward() returns the gradient w.r.t. the image.
  Backbone(const BackboneSpec& spec, int in_channels, const std::string& prefix, nn::Rng& rng,
           bool input_grad);

  Taps forward(const Tensor<T>& input, nn::Mode mode);
  // Empty tap gradients count as zero.
  Tensor<T> backward(const Taps& tap_grads);

  void collect_parameters(std::vector<nn::Parameter<T>*>& out);
  void collect_buffers(std::vector<nn::Buffer<T>*>& out);
  const BackboneSpec& spec() const { return spec_; }

 private:
  BackboneSpec spec_;
  std::array<nn::Sequential<T>, 4> stages_;
  std::array<Shape, 4> tap_shapes_;
};

}  // namespace freqpad::network
