#pragma once

#include <random>

#include "freqpad/nn/layer.hpp"

namespace freqpad::nn {

using Rng = std::mt19937_64;

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  bool bias = true;
};

// 2-D convolution as im2col + GEMM. Weights are He-normal initialized.
template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(const std::string& name, const ConvSpec& spec, Rng& rng);

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;

  const ConvSpec& spec() const { return spec_; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  int output_size(int input_size) const {
    return (input_size + 2 * spec_.padding - spec_.kernel) / spec_.stride + 1;
  }

 private:
  void im2col(const T* image, int h, int w, int ho, int wo, T* cols, int ld) const;
  void col2im(const T* cols, int ld, int h, int w, int ho, int wo, T* image) const;
  int chunk_size(int n, int cols_per_sample) const;

  ConvSpec spec_;
  Parameter<T> weight_;  // out x in x k x k
  Parameter<T> bias_;    // 1 x out x 1 x 1
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d : public Layer<T> {
 public:
  BatchNorm2d(const std::string& name, int channels, T momentum = T(0.1), T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>*>& out) override;

 private:
  int channels_;
  T momentum_;
  T eps_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
  Mode last_mode_ = Mode::Eval;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

 private:
  Tensor<T> output_;
};

template <typename T>
class MaxPool2d : public Layer<T> {
 public:
  MaxPool2d(int kernel, int stride, int padding);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

 private:
  int kernel_, stride_, padding_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

// N x C x H x W -> N x C x 1 x 1
template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

 private:
  Shape input_shape_;
};

// Fully connected over the flattened sample: N x in -> N x out x 1 x 1.
template <typename T>
class Linear : public Layer<T> {
 public:
  Linear(const std::string& name, int in_features, int out_features, Rng& rng);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  int in_, out_;
  Parameter<T> weight_;  // out x in x 1 x 1
  Parameter<T> bias_;    // 1 x out x 1 x 1
  Tensor<T> input_;
};

// Bilinear resampling with half-pixel centers (align_corners = false).
template <typename T>
class BilinearResize : public Layer<T> {
 public:
  BilinearResize(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

 private:
  struct Tap {
    int i0, i1;
    T w0, w1;
  };
  static std::vector<Tap> taps(int in, int out);

  int out_h_, out_w_;
  Shape input_shape_;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>*>& out) override;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<LayerPtr<T>> layers_;
};

// conv3x3(stride) -> BN -> ReLU
template <typename T>
void add_conv_bn_relu(Sequential<T>& seq, const std::string& name, int in, int out, int stride,
                      Rng& rng);

// ResNet bottleneck: 1x1 -> 3x3(stride) -> 1x1 (x4 expansion) with projection shortcut when needed.
template <typename T>
class Bottleneck : public Layer<T> {
 public:
  Bottleneck(const std::string& name, int in_channels, int width, int stride, Rng& rng);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>*>& out) override;

  int out_channels() const { return out_channels_; }

 private:
  int out_channels_;
  Sequential<T> main_;
  std::unique_ptr<Sequential<T>> projection_;
  Tensor<T> output_;
};

}  // namespace freqpad::nn
