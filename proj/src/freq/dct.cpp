#include "freqpad/freq/dct.hpp"

#include <cmath>
#include <numbers>

namespace freqpad::freq {

template <typename T>
Grid<T> dct_matrix(int n) {
  require(n >= 1, "dct size must be positive");
  Grid<T> m(n, n);
  const double scale0 = std::sqrt(1.0 / n);
  const double scale = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      const double c = std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
      m(k, i) = static_cast<T>((k == 0 ? scale0 : scale) * c);
    }
  }
  return m;
}

template <typename T>
Dct2d<T>::Dct2d(int height, int width) : rows_(dct_matrix<T>(height)), cols_(dct_matrix<T>(width)) {}

template <typename T>
void Dct2d<T>::forward(const T* in, T* out) const {
  const int h = height(), w = width();
  ConstGridMap<T> x(in, h, w);
  GridMap<T> y(out, h, w);
  Grid<T> tmp(h, w);
  tmp.noalias() = rows_ * x;
  y.noalias() = tmp * cols_.transpose();
}

template <typename T>
void Dct2d<T>::inverse(const T* in, T* out) const {
  const int h = height(), w = width();
  ConstGridMap<T> y(in, h, w);
  GridMap<T> x(out, h, w);
  Grid<T> tmp(h, w);
  tmp.noalias() = rows_.transpose() * y;
  x.noalias() = tmp * cols_;
}

namespace {

template <typename T>
void check_grid(const Grid<T>& g, const char* what) {
  require(g.rows() >= 1 && g.cols() >= 1, std::string(what) + ": empty grid");
  require(g.allFinite(), std::string(what) + ": non-finite entry");
}

}  // namespace

template <typename T>
Grid<T> dct2(const Grid<T>& image) {
  check_grid(image, "dct2");
  Dct2d<T> plan(image.rows(), image.cols());
  Grid<T> out(image.rows(), image.cols());
  plan.forward(image.data(), out.data());
  return out;
}

template <typename T>
Grid<T> idct2(const Grid<T>& coeffs) {
  check_grid(coeffs, "idct2");
  Dct2d<T> plan(coeffs.rows(), coeffs.cols());
  Grid<T> out(coeffs.rows(), coeffs.cols());
  plan.inverse(coeffs.data(), out.data());
  return out;
}

template Grid<float> dct_matrix<float>(int);
template Grid<double> dct_matrix<double>(int);
template class Dct2d<float>;
template class Dct2d<double>;
template Grid<float> dct2<float>(const Grid<float>&);
template Grid<double> dct2<double>(const Grid<double>&);
template Grid<float> idct2<float>(const Grid<float>&);
template Grid<double> idct2<double>(const Grid<double>&);

}  // namespace freqpad::freq
