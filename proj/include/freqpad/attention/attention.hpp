#pragma once

#include "freqpad/nn/layers.hpp"

namespace freqpad::attention {

struct SpatialAttentionConfig {
  int kernel_size = 7;  // odd; padding kernel_size / 2 keeps the spatial size
};

struct ChannelAttentionConfig {
  int channels = 0;
  int reduction_ratio = 16;  // channels must divide evenly
};

// x * sigmoid(conv_kxk([mean_c(x), max_c(x)])), the map broadcast over channels.
template <typename T>
class SpatialAttention : public nn::Layer<T> {
 public:
  SpatialAttention(const std::string& name, const SpatialAttentionConfig& cfg, nn::Rng& rng);

  Tensor<T> forward(const Tensor<T>& input, nn::Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override;

  // N x 1 x H x W map from the last forward, entries in (0, 1).
  const Tensor<T>& last_map() const { return map_; }
  nn::Conv2d<T>& conv() { return conv_; }

 private:
  nn::Conv2d<T> conv_;
  Tensor<T> input_;
  Tensor<T> map_;
  std::vector<int> argmax_channel_;
};

// x * sigmoid(mlp(avgpool(x)) + mlp(maxpool(x))) with a shared two-layer mlp.
template <typename T>
class ChannelAttention : public nn::Layer<T> {
 public:
  ChannelAttention(const std::string& name, const ChannelAttentionConfig& cfg, nn::Rng& rng);

  Tensor<T> forward(const Tensor<T>& input, nn::Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override;

  // N x C x 1 x 1 scale from the last forward, entries in (0, 1).
  const Tensor<T>& last_scale() const { return scale_; }
  nn::Linear<T>& reduce() { return reduce_; }
  nn::Linear<T>& expand() { return expand_; }

 private:
  int channels_;
  nn::Linear<T> reduce_;
  nn::ReLU<T> relu_;
  nn::Linear<T> expand_;
  Tensor<T> input_;
  Tensor<T> scale_;
  std::vector<std::size_t> argmax_;
};

}  // namespace freqpad::attention
