#include <algorithm>
#include <cmath>

#include "freqpad/nn/layers.hpp"

namespace freqpad::nn {

namespace {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Upper bound on im2col buffer elements per GEMM chunk.
constexpr std::size_t kChunkElements = std::size_t(1) << 22;

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, const ConvSpec& spec, Rng& rng)
    : spec_(spec),
      weight_(name + ".weight",
              Tensor<T>(Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel})),
      bias_(name + ".bias", Tensor<T>(Shape{1, spec.out_channels, 1, 1}), false) {
  require(spec.in_channels > 0 && spec.out_channels > 0, name + ": channel counts must be positive");
  require(spec.kernel > 0 && spec.stride > 0 && spec.padding >= 0, name + ": bad kernel geometry");
  const double fan_in = static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& w : weight_.value.values()) w = static_cast<T>(dist(rng));
}

template <typename T>
void Conv2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  if (spec_.bias) out.push_back(&bias_);
}

template <typename T>
int Conv2d<T>::chunk_size(int n, int cols_per_sample) const {
  const std::size_t rows = static_cast<std::size_t>(spec_.in_channels) * spec_.kernel * spec_.kernel;
  const std::size_t per = rows * cols_per_sample;
  return static_cast<int>(std::clamp<std::size_t>(kChunkElements / std::max<std::size_t>(per, 1), 1, n));
}

// Output columns [lo, hi) read input columns inside [0, w) for kernel offset kx.
static void valid_range(int w, int wo, int stride, int offset, int& lo, int& hi) {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  hi = (w - 1 - offset) < 0 ? 0 : std::min(wo, (w - 1 - offset) / stride + 1);
  if (hi < lo) hi = lo;
}

// cols is (C*k*k) x ld, this sample's block starts at column 0 of `cols`.
template <typename T>
void Conv2d<T>::im2col(const T* image, int h, int w, int ho, int wo, T* cols, int ld) const {
  const int k = spec_.kernel, s = spec_.stride, p = spec_.padding;
  for (int c = 0; c < spec_.in_channels; ++c) {
    const T* plane = image + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ld;
        const int offset = kx - p;
        int lo, hi;
        valid_range(w, wo, s, offset, lo, hi);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s - p + ky;
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          std::fill(dst, dst + lo, T(0));
          if (s == 1) {
            std::copy(src + lo + offset, src + hi + offset, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * s + offset];
          }
          std::fill(dst + hi, dst + wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* cols, int ld, int h, int w, int ho, int wo, T* image) const {
  const int k = spec_.kernel, s = spec_.stride, p = spec_.padding;
  for (int c = 0; c < spec_.in_channels; ++c) {
    T* plane = image + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ld;
        const int offset = kx - p;
        int lo, hi;
        valid_range(w, wo, s, offset, lo, hi);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          const T* src = row + oy * wo;
          for (int ox = lo; ox < hi; ++ox) dst[ox * s + offset] += src[ox];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& input, Mode /*mode*/) {
  require(input.c() == spec_.in_channels,
          weight_.name + ": expected " + std::to_string(spec_.in_channels) + " channels, got " +
              input.shape().str());
  const int n = input.n(), h = input.h(), w = input.w();
  const int ho = output_size(h), wo = output_size(w);
  require(ho > 0 && wo > 0, weight_.name + ": input too small " + input.shape().str());
  input_ = input;

  const int kk = spec_.in_channels * spec_.kernel * spec_.kernel;
  const int hw = ho * wo;
  Tensor<T> out(Shape{n, spec_.out_channels, ho, wo});
  Eigen::Map<const Matrix<T>> weight(weight_.value.data(), spec_.out_channels, kk);
  const int chunk = chunk_size(n, hw);
  Matrix<T> cols(kk, chunk * hw);
  Matrix<T> result(spec_.out_channels, chunk * hw);
  for (int n0 = 0; n0 < n; n0 += chunk) {
    const int m = std::min(chunk, n - n0);
    const int ld = m * hw;
    for (int i = 0; i < m; ++i) im2col(input.sample(n0 + i), h, w, ho, wo, cols.data() + i * hw, chunk * hw);
    result.leftCols(ld).noalias() = weight * cols.leftCols(ld);
    for (int i = 0; i < m; ++i) {
      for (int co = 0; co < spec_.out_channels; ++co) {
        const T b = spec_.bias ? bias_.value[co] : T(0);
        const T* src = result.data() + static_cast<std::size_t>(co) * chunk * hw + i * hw;
        T* dst = out.plane(n0 + i, co);
        for (int j = 0; j < hw; ++j) dst[j] = src[j] + b;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_output) {
  const int n = input_.n(), h = input_.h(), w = input_.w();
  const int ho = output_size(h), wo = output_size(w);
  require(grad_output.shape() == Shape{n, spec_.out_channels, ho, wo},
          weight_.name + ": gradient shape " + grad_output.shape().str());
  const int kk = spec_.in_channels * spec_.kernel * spec_.kernel;
  const int hw = ho * wo;

  Tensor<T> grad_input;
  if (this->input_grad_) grad_input = Tensor<T>(input_.shape());

  Eigen::Map<const Matrix<T>> weight(weight_.value.data(), spec_.out_channels, kk);
  Eigen::Map<Matrix<T>> weight_grad(weight_.grad.data(), spec_.out_channels, kk);
  const int chunk = chunk_size(n, hw);
  const int stride = chunk * hw;
  Matrix<T> cols(kk, stride);
  Matrix<T> grad(spec_.out_channels, stride);
  Matrix<T> grad_cols;
  if (this->input_grad_) grad_cols.resize(kk, stride);

  for (int n0 = 0; n0 < n; n0 += chunk) {
    const int m = std::min(chunk, n - n0);
    const int ld = m * hw;
    for (int i = 0; i < m; ++i) {
      im2col(input_.sample(n0 + i), h, w, ho, wo, cols.data() + i * hw, stride);
      for (int co = 0; co < spec_.out_channels; ++co) {
        const T* src = grad_output.plane(n0 + i, co);
        std::copy_n(src, hw, grad.data() + static_cast<std::size_t>(co) * stride + i * hw);
      }
    }
    weight_grad.noalias() += grad.leftCols(ld) * cols.leftCols(ld).transpose();
    if (spec_.bias) {
      for (int co = 0; co < spec_.out_channels; ++co) bias_.grad[co] += grad.row(co).head(ld).sum();
    }
    if (this->input_grad_) {
      grad_cols.leftCols(ld).noalias() = weight.transpose() * grad.leftCols(ld);
      for (int i = 0; i < m; ++i) {
        col2im(grad_cols.data() + i * hw, stride, h, w, ho, wo, grad_input.sample(n0 + i));
      }
    }
  }
  return grad_input;
}

template class Conv2d<float>;
template class Conv2d<double>;

}  // namespace freqpad::nn
