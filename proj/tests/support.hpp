#pragma once

#include <gtest/gtest.h>

#include "freqpad/nn/layer.hpp"
#include "oracles.hpp"

namespace freqpad::check {

// Worst relative error of backward() against central differences; see
// layer_gradient_error. Fails the current test above 1e-4.
inline double check_layer_gradients(nn::Layer<double>& layer, Tensor<double> x, nn::Mode mode, double h = 1e-5,
                                    std::uint64_t seed = 17) {
  std::string where;
  const double worst = layer_gradient_error(layer, std::move(x), mode, h, seed, &where);
  EXPECT_LT(worst, 1e-4) << "worst at " << where;
  return worst;
}

}  // namespace freqpad::check
