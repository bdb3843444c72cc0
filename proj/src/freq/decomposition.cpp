#include "freqpad/freq/decomposition.hpp"

namespace freqpad::freq {

namespace {

constexpr int kBands = 4;

template <typename T>
void check_input(const Tensor<T>& image, const FilterBank<T>& bank) {
  require(image.h() == bank.height() && image.w() == bank.width(),
          "decompose: image " + image.shape().str() + " does not match filter bank " +
              std::to_string(bank.height()) + "x" + std::to_string(bank.width()));
  require(image.n() >= 1 && image.c() >= 1, "decompose: empty image");
}

template <typename T>
Tensor<T> transform_planes(const Dct2d<T>& plan, const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) plan.forward(x.plane(n, c), out.plane(n, c));
  return out;
}

template <typename T>
Tensor<T> filter_and_invert(const Dct2d<T>& plan, const Tensor<T>& coeffs,
                            const std::array<Grid<T>, kBands>& filters) {
  const Shape s = coeffs.shape();
  Tensor<T> out(Shape{s.n, kBands * s.c, s.h, s.w});
  Grid<T> masked(s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int band = 0; band < kBands; ++band) {
      for (int c = 0; c < s.c; ++c) {
        masked = coeffs.plane_map(n, c).cwiseProduct(filters[band]);
        plan.inverse(masked.data(), out.plane(n, band * s.c + c));
      }
    }
  }
  return out;
}

template <typename T>
std::array<Grid<T>, kBands> combined_filters(const FilterBank<T>& bank) {
  std::array<Grid<T>, kBands> filters;
  for (int band = 0; band < kBands; ++band) filters[band] = bank.combined_filter(band);
  return filters;
}

}  // namespace

template <typename T>
DecomposedStack<T> decompose(const Tensor<T>& image, const FilterBank<T>& bank) {
  check_input(image, bank);
  require(bank.learnable().value.all_finite(), "decompose: non-finite learnable mask");
  require(image.all_finite(), "decompose: non-finite input");
  const Dct2d<T> plan(bank.height(), bank.width());
  const Tensor<T> coeffs = transform_planes(plan, image);
  return {filter_and_invert(plan, coeffs, combined_filters(bank)), image.shape()};
}

template <typename T>
MfdLayer<T>::MfdLayer(FilterBank<T> bank)
    : bank_(std::move(bank)), plan_(bank_.height(), bank_.width()) {}

template <typename T>
Tensor<T> MfdLayer<T>::forward(const Tensor<T>& input, nn::Mode /*mode*/) {
  check_input(input, bank_);
  coeffs_ = transform_planes(plan_, input);
  filters_ = combined_filters(bank_);
  return filter_and_invert(plan_, coeffs_, filters_);
}

template <typename T>
Tensor<T> MfdLayer<T>::backward(const Tensor<T>& grad_output) {
  const Shape s = coeffs_.shape();
  require(grad_output.shape() == Shape{s.n, kBands * s.c, s.h, s.w},
          "MfdLayer::backward: gradient shape " + grad_output.shape().str());

  std::array<Grid<T>, kBands> filter_grad;
  for (auto& g : filter_grad) g = Grid<T>::Zero(s.h, s.w);
  Tensor<T> grad_input;
  if (this->input_grad_) grad_input = Tensor<T>(s);

  Grid<T> spectral(s.h, s.w);
  Grid<T> input_spectral(s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      input_spectral.setZero();
      for (int band = 0; band < kBands; ++band) {
        // The adjoint of the inverse transform is the forward transform.
        plan_.forward(grad_output.plane(n, band * s.c + c), spectral.data());
        filter_grad[band] += coeffs_.plane_map(n, c).cwiseProduct(spectral);
        if (this->input_grad_) input_spectral += spectral.cwiseProduct(filters_[band]);
      }
      if (this->input_grad_) plan_.inverse(input_spectral.data(), grad_input.plane(n, c));
    }
  }

  // d sigma_norm / df = (1 - sigma^2) / 2
  auto& learn = bank_.learnable();
  for (int band = 0; band < kBands; ++band) {
    T* grad = learn.grad.plane(0, band);
    const T* value = learn.value.plane(0, band);
    for (int i = 0; i < s.h * s.w; ++i) {
      const T sig = std::tanh(T(0.5) * value[i]);
      grad[i] += filter_grad[band].data()[i] * T(0.5) * (T(1) - sig * sig);
    }
  }
  return grad_input;
}

template <typename T>
void MfdLayer<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  out.push_back(&bank_.learnable());
}

template DecomposedStack<float> decompose<float>(const Tensor<float>&, const FilterBank<float>&);
template DecomposedStack<double> decompose<double>(const Tensor<double>&, const FilterBank<double>&);
template class MfdLayer<float>;
template class MfdLayer<double>;

}  // namespace freqpad::freq
