#pragma once

#include "freqpad/tensor.hpp"

namespace freqpad::freq {

// Orthonormal type-II DCT basis: row k holds alpha_k * cos(pi * (2i + 1) * k / 2n).
template <typename T>
Grid<T> dct_matrix(int n);

// Separable orthonormal 2-D DCT with cached row/column bases. Applying the
// same plan from several threads is safe; it holds no scratch state.
template <typename T>
class Dct2d {
 public:
  Dct2d(int height, int width);

  int height() const { return rows_.rows(); }
  int width() const { return cols_.rows(); }

  // out = A_h * in * A_w^T. `in` and `out` may not alias.
  void forward(const T* in, T* out) const;
  // out = A_h^T * in * A_w, the exact inverse (and adjoint) of forward.
  void inverse(const T* in, T* out) const;

 private:
  Grid<T> rows_;
  Grid<T> cols_;
};

// Checked single-grid transforms. Non-finite entries are rejected.
template <typename T>
Grid<T> dct2(const Grid<T>& image);
template <typename T>
Grid<T> idct2(const Grid<T>& coeffs);

}  // namespace freqpad::freq
