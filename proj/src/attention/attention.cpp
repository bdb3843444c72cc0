#include "freqpad/attention/attention.hpp"

#include <cmath>

namespace freqpad::attention {

namespace {

template <typename T>
T sigmoid(T z) {
  return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

nn::ConvSpec spatial_conv_spec(const SpatialAttentionConfig& cfg) {
  require(cfg.kernel_size > 0 && cfg.kernel_size % 2 == 1,
          "spatial attention kernel must be odd, got " + std::to_string(cfg.kernel_size));
  return {2, 1, cfg.kernel_size, 1, cfg.kernel_size / 2, true};
}

int reduced_channels(const ChannelAttentionConfig& cfg) {
  require(cfg.channels > 0 && cfg.reduction_ratio > 0, "channel attention needs positive sizes");
  require(cfg.channels % cfg.reduction_ratio == 0,
          "channel attention: " + std::to_string(cfg.channels) + " channels not divisible by " +
              std::to_string(cfg.reduction_ratio));
  return cfg.channels / cfg.reduction_ratio;
}

}  // namespace

template <typename T>
SpatialAttention<T>::SpatialAttention(const std::string& name, const SpatialAttentionConfig& cfg,
                                      nn::Rng& rng)
    : conv_(name + ".conv", spatial_conv_spec(cfg), rng) {}

template <typename T>
void SpatialAttention<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  conv_.collect_parameters(out);
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(const Tensor<T>& input, nn::Mode mode) {
  require(input.c() >= 1 && input.all_finite(), "spatial attention: invalid input " + input.shape().str());
  const int n = input.n(), c = input.c();
  const std::size_t hw = input.shape().plane();
  input_ = input;
  Tensor<T> pooled(Shape{n, 2, input.h(), input.w()});
  argmax_channel_.assign(static_cast<std::size_t>(n) * hw, 0);
  for (int i = 0; i < n; ++i) {
    T* avg = pooled.plane(i, 0);
    T* mx = pooled.plane(i, 1);
    int* arg = argmax_channel_.data() + i * hw;
    std::copy_n(input.plane(i, 0), hw, avg);
    std::copy_n(input.plane(i, 0), hw, mx);
    for (int ch = 1; ch < c; ++ch) {
      const T* x = input.plane(i, ch);
      for (std::size_t j = 0; j < hw; ++j) {
        avg[j] += x[j];
        if (x[j] > mx[j]) {
          mx[j] = x[j];
          arg[j] = ch;
        }
      }
    }
    for (std::size_t j = 0; j < hw; ++j) avg[j] /= static_cast<T>(c);
  }
  map_ = conv_.forward(pooled, mode);
  for (auto& v : map_.values()) v = sigmoid(v);
  Tensor<T> out(input.shape());
  for (int i = 0; i < n; ++i) {
    const T* m = map_.plane(i, 0);
    for (int ch = 0; ch < c; ++ch) {
      const T* x = input.plane(i, ch);
      T* y = out.plane(i, ch);
      for (std::size_t j = 0; j < hw; ++j) y[j] = x[j] * m[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> SpatialAttention<T>::backward(const Tensor<T>& grad_output) {
  require(grad_output.shape() == input_.shape(), "spatial attention: gradient shape mismatch");
  const int n = input_.n(), c = input_.c();
  const std::size_t hw = input_.shape().plane();
  Tensor<T> grad_logit(map_.shape());
  Tensor<T> grad_input(input_.shape());
  for (int i = 0; i < n; ++i) {
    const T* m = map_.plane(i, 0);
    T* gz = grad_logit.plane(i, 0);
    for (int ch = 0; ch < c; ++ch) {
      const T* g = grad_output.plane(i, ch);
      const T* x = input_.plane(i, ch);
      T* gx = grad_input.plane(i, ch);
      for (std::size_t j = 0; j < hw; ++j) {
        gz[j] += g[j] * x[j];
        gx[j] = g[j] * m[j];
      }
    }
    for (std::size_t j = 0; j < hw; ++j) gz[j] *= m[j] * (T(1) - m[j]);
  }
  const Tensor<T> grad_pooled = conv_.backward(grad_logit);
  for (int i = 0; i < n; ++i) {
    const T* g_avg = grad_pooled.plane(i, 0);
    const T* g_max = grad_pooled.plane(i, 1);
    const int* arg = argmax_channel_.data() + i * hw;
    for (int ch = 0; ch < c; ++ch) {
      T* gx = grad_input.plane(i, ch);
      for (std::size_t j = 0; j < hw; ++j) gx[j] += g_avg[j] / static_cast<T>(c);
    }
    for (std::size_t j = 0; j < hw; ++j) grad_input.plane(i, arg[j])[j] += g_max[j];
  }
  return grad_input;
}

template <typename T>
ChannelAttention<T>::ChannelAttention(const std::string& name, const ChannelAttentionConfig& cfg,
                                      nn::Rng& rng)
    : channels_(cfg.channels),
      reduce_(name + ".fc1", cfg.channels, reduced_channels(cfg), rng),
      expand_(name + ".fc2", reduced_channels(cfg), cfg.channels, rng) {}

template <typename T>
void ChannelAttention<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  reduce_.collect_parameters(out);
  expand_.collect_parameters(out);
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& input, nn::Mode mode) {
  require(input.c() == channels_, "channel attention: expected " + std::to_string(channels_) +
                                      " channels, got " + input.shape().str());
  const int n = input.n();
  const std::size_t hw = input.shape().plane();
  input_ = input;
  // Rows [0, n) hold average-pooled vectors, rows [n, 2n) max-pooled ones.
  Tensor<T> pooled(Shape{2 * n, channels_, 1, 1});
  argmax_.assign(static_cast<std::size_t>(n) * channels_, 0);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < channels_; ++ch) {
      const T* x = input.plane(i, ch);
      double sum = 0.0;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < hw; ++j) {
        sum += x[j];
        if (x[j] > x[arg]) arg = j;
      }
      pooled.at(i, ch, 0, 0) = static_cast<T>(sum / hw);
      pooled.at(n + i, ch, 0, 0) = x[arg];
      argmax_[static_cast<std::size_t>(i) * channels_ + ch] = arg;
    }
  }
  const Tensor<T> logits = expand_.forward(relu_.forward(reduce_.forward(pooled, mode), mode), mode);
  scale_ = Tensor<T>(Shape{n, channels_, 1, 1});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < channels_; ++ch)
      scale_.at(i, ch, 0, 0) = sigmoid(logits.at(i, ch, 0, 0) + logits.at(n + i, ch, 0, 0));

  Tensor<T> out(input.shape());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < channels_; ++ch) {
      const T s = scale_.at(i, ch, 0, 0);
      const T* x = input.plane(i, ch);
      T* y = out.plane(i, ch);
      for (std::size_t j = 0; j < hw; ++j) y[j] = x[j] * s;
    }
  }
  return out;
}

template <typename T>
Tensor<T> ChannelAttention<T>::backward(const Tensor<T>& grad_output) {
  require(grad_output.shape() == input_.shape(), "channel attention: gradient shape mismatch");
  const int n = input_.n();
  const std::size_t hw = input_.shape().plane();
  Tensor<T> grad_input(input_.shape());
  Tensor<T> grad_logits(Shape{2 * n, channels_, 1, 1});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < channels_; ++ch) {
      const T s = scale_.at(i, ch, 0, 0);
      const T* g = grad_output.plane(i, ch);
      const T* x = input_.plane(i, ch);
      T* gx = grad_input.plane(i, ch);
      double gs = 0.0;
      for (std::size_t j = 0; j < hw; ++j) {
        gs += g[j] * x[j];
        gx[j] = g[j] * s;
      }
      const T gz = static_cast<T>(gs) * s * (T(1) - s);
      grad_logits.at(i, ch, 0, 0) = gz;
      grad_logits.at(n + i, ch, 0, 0) = gz;
    }
  }
  const Tensor<T> grad_pooled = reduce_.backward(relu_.backward(expand_.backward(grad_logits)));
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < channels_; ++ch) {
      T* gx = grad_input.plane(i, ch);
      const T g_avg = grad_pooled.at(i, ch, 0, 0) / static_cast<T>(hw);
      for (std::size_t j = 0; j < hw; ++j) gx[j] += g_avg;
      gx[argmax_[static_cast<std::size_t>(i) * channels_ + ch]] += grad_pooled.at(n + i, ch, 0, 0);
    }
  }
  return grad_input;
}

template class SpatialAttention<float>;
template class SpatialAttention<double>;
template class ChannelAttention<float>;
template class ChannelAttention<double>;

}  // namespace freqpad::attention
