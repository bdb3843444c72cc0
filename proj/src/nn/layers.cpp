#include <algorithm>
#include <cmath>
#include <limits>

#include "freqpad/nn/layers.hpp"

namespace freqpad::nn {

// ---------------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels, T momentum, T eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(name + ".gamma", Tensor<T>(Shape{1, channels, 1, 1}, T(1)), false),
      beta_(name + ".beta", Tensor<T>(Shape{1, channels, 1, 1}), false),
      running_mean_{name + ".running_mean", Tensor<T>(Shape{1, channels, 1, 1})},
      running_var_{name + ".running_var", Tensor<T>(Shape{1, channels, 1, 1}, T(1))} {}

template <typename T>
void BatchNorm2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
void BatchNorm2d<T>::collect_buffers(std::vector<Buffer<T>*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& input, Mode mode) {
  require(input.c() == channels_, gamma_.name + ": channel mismatch " + input.shape().str());
  const int n = input.n();
  const std::size_t hw = input.shape().plane();
  const double count = static_cast<double>(n) * hw;
  last_mode_ = mode;
  Tensor<T> out(input.shape());
  if (mode == Mode::Train) {
    normalized_ = Tensor<T>(input.shape());
    inv_std_.assign(channels_, T(0));
  }
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const T* x = input.plane(i, c);
        for (std::size_t j = 0; j < hw; ++j) sum += x[j];
      }
      mean = sum / count;
      for (int i = 0; i < n; ++i) {
        const T* x = input.plane(i, c);
        for (std::size_t j = 0; j < hw; ++j) sq += (x[j] - mean) * (x[j] - mean);
      }
      var = sq / count;
      const double unbiased = count > 1 ? sq / (count - 1) : var;
      running_mean_.value[c] = static_cast<T>((1 - momentum_) * running_mean_.value[c] + momentum_ * mean);
      running_var_.value[c] = static_cast<T>((1 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
    const T g = gamma_.value[c], b = beta_.value[c], m = static_cast<T>(mean);
    if (mode == Mode::Train) inv_std_[c] = inv;
    for (int i = 0; i < n; ++i) {
      const T* x = input.plane(i, c);
      T* y = out.plane(i, c);
      T* xn = mode == Mode::Train ? normalized_.plane(i, c) : nullptr;
      for (std::size_t j = 0; j < hw; ++j) {
        const T v = (x[j] - m) * inv;
        if (xn) xn[j] = v;
        y[j] = g * v + b;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_output) {
  require(last_mode_ == Mode::Train, gamma_.name + ": backward requires a training-mode forward");
  require(grad_output.shape() == normalized_.shape(), gamma_.name + ": gradient shape mismatch");
  const int n = grad_output.n();
  const std::size_t hw = grad_output.shape().plane();
  const double count = static_cast<double>(n) * hw;
  Tensor<T> grad_input;
  if (this->input_grad_) grad_input = Tensor<T>(grad_output.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xn = 0.0;
    for (int i = 0; i < n; ++i) {
      const T* dy = grad_output.plane(i, c);
      const T* xn = normalized_.plane(i, c);
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += dy[j];
        sum_dy_xn += dy[j] * xn[j];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xn);
    beta_.grad[c] += static_cast<T>(sum_dy);
    if (!this->input_grad_) continue;
    const T scale = gamma_.value[c] * inv_std_[c];
    const T mean_dy = static_cast<T>(sum_dy / count);
    const T mean_dy_xn = static_cast<T>(sum_dy_xn / count);
    for (int i = 0; i < n; ++i) {
      const T* dy = grad_output.plane(i, c);
      const T* xn = normalized_.plane(i, c);
      T* dx = grad_input.plane(i, c);
      for (std::size_t j = 0; j < hw; ++j) dx[j] = scale * (dy[j] - mean_dy - xn[j] * mean_dy_xn);
    }
  }
  return grad_input;
}

// ----------------------------------------------------------------------- ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& input, Mode /*mode*/) {
  output_ = input;
  for (auto& v : output_.values()) v = std::max(v, T(0));
  return output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_output) {
  require(grad_output.shape() == output_.shape(), "relu: gradient shape mismatch");
  Tensor<T> grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (output_[i] <= T(0)) grad[i] = T(0);
  }
  return grad;
}

// ------------------------------------------------------------------ MaxPool2d

template <typename T>
MaxPool2d<T>::MaxPool2d(int kernel, int stride, int padding)
    : kernel_(kernel), stride_(stride), padding_(padding) {}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& input, Mode /*mode*/) {
  const int h = input.h(), w = input.w();
  const int ho = (h + 2 * padding_ - kernel_) / stride_ + 1;
  const int wo = (w + 2 * padding_ - kernel_) / stride_ + 1;
  input_shape_ = input.shape();
  Tensor<T> out(Shape{input.n(), input.c(), ho, wo});
  argmax_.assign(out.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const std::size_t base = static_cast<std::size_t>(n * input.c() + c) * h * w;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t arg = base;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - padding_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - padding_ + kx;
              if (ix < 0 || ix >= w) continue;
              const std::size_t idx = base + static_cast<std::size_t>(iy) * w + ix;
              if (input[idx] > best) {
                best = input[idx];
                arg = idx;
              }
            }
          }
          out[o] = best;
          argmax_[o] = arg;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad_output) {
  require(grad_output.size() == argmax_.size(), "maxpool: gradient shape mismatch");
  Tensor<T> grad(input_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) grad[argmax_[i]] += grad_output[i];
  return grad;
}

// -------------------------------------------------------------- GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& input, Mode /*mode*/) {
  input_shape_ = input.shape();
  Tensor<T> out(Shape{input.n(), input.c(), 1, 1});
  const std::size_t hw = input.shape().plane();
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const T* x = input.plane(n, c);
      double sum = 0.0;
      for (std::size_t j = 0; j < hw; ++j) sum += x[j];
      out.at(n, c, 0, 0) = static_cast<T>(sum / hw);
    }
  }
  return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_output) {
  Tensor<T> grad(input_shape_);
  const std::size_t hw = input_shape_.plane();
  for (int n = 0; n < input_shape_.n; ++n) {
    for (int c = 0; c < input_shape_.c; ++c) {
      const T g = grad_output.at(n, c, 0, 0) / static_cast<T>(hw);
      std::fill_n(grad.plane(n, c), hw, g);
    }
  }
  return grad;
}

// --------------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(const std::string& name, int in_features, int out_features, Rng& rng)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", Tensor<T>(Shape{out_features, in_features, 1, 1})),
      bias_(name + ".bias", Tensor<T>(Shape{1, out_features, 1, 1}), false) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : weight_.value.values()) w = static_cast<T>(dist(rng));
  for (auto& b : bias_.value.values()) b = static_cast<T>(dist(rng));
}

template <typename T>
void Linear<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& input, Mode /*mode*/) {
  require(static_cast<int>(input.shape().sample()) == in_,
          weight_.name + ": expected " + std::to_string(in_) + " features, got " + input.shape().str());
  input_ = input;
  Tensor<T> out(Shape{input.n(), out_, 1, 1});
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Matrix> x(input.data(), input.n(), in_);
  Eigen::Map<const Matrix> wmat(weight_.value.data(), out_, in_);
  Eigen::Map<Matrix> y(out.data(), input.n(), out_);
  y.noalias() = x * wmat.transpose();
  for (int n = 0; n < input.n(); ++n)
    for (int o = 0; o < out_; ++o) y(n, o) += bias_.value[o];
  return out;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_output) {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int n = input_.n();
  require(static_cast<int>(grad_output.size()) == n * out_, weight_.name + ": gradient shape mismatch");
  Eigen::Map<const Matrix> x(input_.data(), n, in_);
  Eigen::Map<const Matrix> gy(grad_output.data(), n, out_);
  Eigen::Map<Matrix> gw(weight_.grad.data(), out_, in_);
  gw.noalias() += gy.transpose() * x;
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_; ++o) bias_.grad[o] += gy(i, o);
  Tensor<T> grad;
  if (this->input_grad_) {
    grad = Tensor<T>(input_.shape());
    Eigen::Map<const Matrix> wmat(weight_.value.data(), out_, in_);
    Eigen::Map<Matrix> gx(grad.data(), n, in_);
    gx.noalias() = gy * wmat;
  }
  return grad;
}

// ------------------------------------------------------------- BilinearResize

template <typename T>
std::vector<typename BilinearResize<T>::Tap> BilinearResize<T>::taps(int in, int out) {
  std::vector<Tap> result(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = std::max((o + 0.5) * scale - 0.5, 0.0);
    int i0 = std::min(static_cast<int>(src), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    const double frac = src - i0;
    result[o] = {i0, i1, static_cast<T>(1.0 - frac), static_cast<T>(frac)};
  }
  return result;
}

template <typename T>
Tensor<T> BilinearResize<T>::forward(const Tensor<T>& input, Mode /*mode*/) {
  input_shape_ = input.shape();
  if (input.h() == out_h_ && input.w() == out_w_) return input;
  const auto ty = taps(input.h(), out_h_);
  const auto tx = taps(input.w(), out_w_);
  Tensor<T> out(Shape{input.n(), input.c(), out_h_, out_w_});
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const auto x = input.plane_map(n, c);
      auto y = out.plane_map(n, c);
      for (int oy = 0; oy < out_h_; ++oy) {
        const auto& a = ty[oy];
        for (int ox = 0; ox < out_w_; ++ox) {
          const auto& b = tx[ox];
          y(oy, ox) = a.w0 * (b.w0 * x(a.i0, b.i0) + b.w1 * x(a.i0, b.i1)) +
                      a.w1 * (b.w0 * x(a.i1, b.i0) + b.w1 * x(a.i1, b.i1));
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> BilinearResize<T>::backward(const Tensor<T>& grad_output) {
  if (input_shape_.h == out_h_ && input_shape_.w == out_w_) return grad_output;
  const auto ty = taps(input_shape_.h, out_h_);
  const auto tx = taps(input_shape_.w, out_w_);
  Tensor<T> grad(input_shape_);
  for (int n = 0; n < input_shape_.n; ++n) {
    for (int c = 0; c < input_shape_.c; ++c) {
      const auto gy = grad_output.plane_map(n, c);
      auto gx = grad.plane_map(n, c);
      for (int oy = 0; oy < out_h_; ++oy) {
        const auto& a = ty[oy];
        for (int ox = 0; ox < out_w_; ++ox) {
          const auto& b = tx[ox];
          const T g = gy(oy, ox);
          gx(a.i0, b.i0) += a.w0 * b.w0 * g;
          gx(a.i0, b.i1) += a.w0 * b.w1 * g;
          gx(a.i1, b.i0) += a.w1 * b.w0 * g;
          gx(a.i1, b.i1) += a.w1 * b.w1 * g;
        }
      }
    }
  }
  return grad;
}

// ----------------------------------------------------------------- Sequential

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& input, Mode mode) {
  Tensor<T> x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_output) {
  if (!layers_.empty()) layers_.front()->set_input_grad(this->input_grad_);
  Tensor<T> g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

template <typename T>
void Sequential<T>::collect_buffers(std::vector<Buffer<T>*>& out) {
  for (auto& layer : layers_) layer->collect_buffers(out);
}

template <typename T>
void add_conv_bn_relu(Sequential<T>& seq, const std::string& name, int in, int out, int stride, Rng& rng) {
  seq.template add<Conv2d<T>>(name + ".conv", ConvSpec{in, out, 3, stride, 1, false}, rng);
  seq.template add<BatchNorm2d<T>>(name + ".bn", out);
  seq.template add<ReLU<T>>();
}

// ----------------------------------------------------------------- Bottleneck

template <typename T>
Bottleneck<T>::Bottleneck(const std::string& name, int in_channels, int width, int stride, Rng& rng)
    : out_channels_(width * 4) {
  main_.template add<Conv2d<T>>(name + ".conv1", ConvSpec{in_channels, width, 1, 1, 0, false}, rng);
  main_.template add<BatchNorm2d<T>>(name + ".bn1", width);
  main_.template add<ReLU<T>>();
  main_.template add<Conv2d<T>>(name + ".conv2", ConvSpec{width, width, 3, stride, 1, false}, rng);
  main_.template add<BatchNorm2d<T>>(name + ".bn2", width);
  main_.template add<ReLU<T>>();
  main_.template add<Conv2d<T>>(name + ".conv3", ConvSpec{width, out_channels_, 1, 1, 0, false}, rng);
  main_.template add<BatchNorm2d<T>>(name + ".bn3", out_channels_);
  if (stride != 1 || in_channels != out_channels_) {
    projection_ = std::make_unique<Sequential<T>>();
    projection_->template add<Conv2d<T>>(name + ".downsample.conv",
                                         ConvSpec{in_channels, out_channels_, 1, stride, 0, false}, rng);
    projection_->template add<BatchNorm2d<T>>(name + ".downsample.bn", out_channels_);
  }
}

template <typename T>
Tensor<T> Bottleneck<T>::forward(const Tensor<T>& input, Mode mode) {
  Tensor<T> y = main_.forward(input, mode);
  y += projection_ ? projection_->forward(input, mode) : input;
  for (auto& v : y.values()) v = std::max(v, T(0));
  output_ = y;
  return y;
}

template <typename T>
Tensor<T> Bottleneck<T>::backward(const Tensor<T>& grad_output) {
  Tensor<T> g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (output_[i] <= T(0)) g[i] = T(0);
  }
  main_.set_input_grad(this->input_grad_);
  Tensor<T> gx = main_.backward(g);
  if (projection_) {
    projection_->set_input_grad(this->input_grad_);
    Tensor<T> gp = projection_->backward(g);
    if (this->input_grad_) gx += gp;
  } else if (this->input_grad_) {
    gx += g;
  }
  return gx;
}

template <typename T>
void Bottleneck<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  main_.collect_parameters(out);
  if (projection_) projection_->collect_parameters(out);
}

template <typename T>
void Bottleneck<T>::collect_buffers(std::vector<Buffer<T>*>& out) {
  main_.collect_buffers(out);
  if (projection_) projection_->collect_buffers(out);
}

template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class Linear<float>;
template class Linear<double>;
template class BilinearResize<float>;
template class BilinearResize<double>;
template class Sequential<float>;
template class Sequential<double>;
template class Bottleneck<float>;
template class Bottleneck<double>;
template void add_conv_bn_relu<float>(Sequential<float>&, const std::string&, int, int, int, Rng&);
template void add_conv_bn_relu<double>(Sequential<double>&, const std::string&, int, int, int, Rng&);

}  // namespace freqpad::nn
