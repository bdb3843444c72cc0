#include <gtest/gtest.h>

#include "freqpad/error.hpp"
#include "freqpad/nn/layers.hpp"
#include "support.hpp"

using namespace freqpad;
using nn::Mode;

namespace {

// Direct-loop convolution used as the reference for the im2col path.
Tensor<double> naive_conv(const Tensor<double>& x, nn::Conv2d<double>& conv) {
  const auto& s = conv.spec();
  const int ho = conv.output_size(x.h()), wo = conv.output_size(x.w());
  Tensor<double> y(Shape{x.n(), s.out_channels, ho, wo});
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < s.out_channels; ++o)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double acc = s.bias ? conv.bias().value[o] : 0.0;
          for (int c = 0; c < s.in_channels; ++c)
            for (int ki = 0; ki < s.kernel; ++ki)
              for (int kj = 0; kj < s.kernel; ++kj) {
                const int r = i * s.stride - s.padding + ki, q = j * s.stride - s.padding + kj;
                if (r < 0 || q < 0 || r >= x.h() || q >= x.w()) continue;
                acc += conv.weight().value.at(o, c, ki, kj) * x.at(n, c, r, q);
              }
          y.at(n, o, i, j) = acc;
        }
  return y;
}

}  // namespace

TEST(Conv2d, MatchesDirectLoopOracle) {
  nn::Rng rng(1);
  for (auto spec : {nn::ConvSpec{3, 5, 3, 1, 1, true}, nn::ConvSpec{4, 2, 3, 2, 1, false},
                    nn::ConvSpec{2, 3, 1, 1, 0, true}, nn::ConvSpec{2, 4, 7, 2, 3, true}}) {
    nn::Conv2d<double> conv("c", spec, rng);
    if (spec.bias)
      for (std::size_t i = 0; i < conv.bias().value.size(); ++i) conv.bias().value[i] = 0.1 * (i + 1.0);
    const auto x = check::random_tensor<double>(Shape{2, spec.in_channels, 11, 9}, 2);
    const auto y = conv.forward(x, Mode::Eval);
    const auto expected = naive_conv(x, conv);
    ASSERT_EQ(y.shape(), expected.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  nn::Rng rng(3);
  nn::Conv2d<double> conv("c", {3, 4, 3, 2, 1, true}, rng);
  EXPECT_LT(check::check_layer_gradients(conv, check::random_tensor<double>(Shape{2, 3, 7, 6}, 4), Mode::Train), 1e-4);
}

TEST(Conv2d, RejectsWrongChannelCount) {
  nn::Rng rng(0);
  nn::Conv2d<double> conv("c", {3, 4, 3, 1, 1, true}, rng);
  EXPECT_THROW(conv.forward(Tensor<double>(Shape{1, 2, 5, 5}), Mode::Eval), ValidationError);
  EXPECT_THROW(nn::Conv2d<double>("bad", {0, 4, 3, 1, 1, true}, rng), ValidationError);
}

TEST(BatchNorm2d, TrainModeNormalizesPerChannel) {
  nn::BatchNorm2d<double> bn("bn", 3);
  const auto x = check::random_tensor<double>(Shape{4, 3, 5, 5}, 5, -3.0, 7.0);
  const auto y = bn.forward(x, Mode::Train);
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, sq = 0.0;
    for (int n = 0; n < 4; ++n) mean += y.plane_map(n, c).sum();
    mean /= 100.0;
    for (int n = 0; n < 4; ++n) sq += (y.plane_map(n, c).array() - mean).square().sum();
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 100.0, 1.0, 1e-3);
  }
}

TEST(BatchNorm2d, GradientsMatchFiniteDifferences) {
  nn::BatchNorm2d<double> bn("bn", 3);
  auto params = nn::parameters_of<double>(bn);
  for (auto* p : params)
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += 0.3 * (i + 1.0);
  EXPECT_LT(check::check_layer_gradients(bn, check::random_tensor<double>(Shape{3, 3, 4, 4}, 6), Mode::Train), 1e-4);
}

TEST(BatchNorm2d, BackwardAfterEvalForwardIsRejected) {
  nn::BatchNorm2d<double> bn("bn", 2);
  const auto y = bn.forward(check::random_tensor<double>(Shape{2, 2, 3, 3}, 7), Mode::Eval);
  EXPECT_THROW(bn.backward(y), ValidationError);
}

TEST(BatchNorm2d, EvalUsesRunningStatistics) {
  nn::BatchNorm2d<double> bn("bn", 1);
  std::vector<nn::Buffer<double>*> buffers;
  bn.collect_buffers(buffers);
  ASSERT_EQ(buffers.size(), 2u);
  Tensor<double> x(Shape{1, 1, 2, 2}, 2.0);
  // Fresh running stats are mean 0, var 1, so eval is the identity up to eps.
  const auto y = bn.forward(x, Mode::Eval);
  EXPECT_NEAR(y[0], 2.0 / std::sqrt(1.0 + 1e-5), 1e-12);
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  nn::Rng rng(8);
  nn::Linear<double> fc("fc", 12, 5, rng);
  EXPECT_LT(check::check_layer_gradients(fc, check::random_tensor<double>(Shape{3, 3, 2, 2}, 9), Mode::Train), 1e-4);
}

TEST(Pooling, MaxPoolGradients) {
  nn::MaxPool2d<double> pool(3, 2, 1);
  EXPECT_LT(check::check_layer_gradients(pool, check::random_tensor<double>(Shape{2, 2, 7, 8}, 10), Mode::Train), 1e-4);
}

TEST(Pooling, MaxPoolPicksWindowMaximum) {
  nn::MaxPool2d<double> pool(2, 2, 0);
  Tensor<double> x(Shape{1, 1, 2, 4});
  for (std::size_t i = 0; i < 8; ++i) x[i] = static_cast<double>((i * 5) % 8);
  const auto y = pool.forward(x, Mode::Eval);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  // rows {0,5,2,7} and {4,1,6,3}
  EXPECT_EQ(y[0], 5.0);
  EXPECT_EQ(y[1], 7.0);
}

TEST(Pooling, GlobalAveragePool) {
  nn::GlobalAvgPool<double> gap;
  const auto x = check::random_tensor<double>(Shape{2, 3, 4, 5}, 11);
  const auto y = gap.forward(x, Mode::Eval);
  ASSERT_EQ(y.shape(), (Shape{2, 3, 1, 1}));
  EXPECT_NEAR(y.at(1, 2, 0, 0), x.plane_map(1, 2).mean(), 1e-14);
  EXPECT_LT(check::check_layer_gradients(gap, x, Mode::Train), 1e-4);
}

TEST(ReLU, GradientsAwayFromKink) {
  nn::ReLU<double> relu;
  EXPECT_LT(check::check_layer_gradients(relu, check::random_tensor<double>(Shape{2, 2, 3, 3}, 12), Mode::Train), 1e-4);
}

TEST(BilinearResize, ConstantStaysConstantAndGradientsMatch) {
  nn::BilinearResize<double> up(14, 14);
  const auto y = up.forward(Tensor<double>(Shape{1, 2, 4, 4}, 1.5), Mode::Eval);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 14, 14}));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], 1.5, 1e-14);
  EXPECT_LT(check::check_layer_gradients(up, check::random_tensor<double>(Shape{2, 2, 4, 5}, 13), Mode::Train), 1e-4);
  nn::BilinearResize<double> down(3, 2);
  EXPECT_LT(check::check_layer_gradients(down, check::random_tensor<double>(Shape{1, 2, 7, 7}, 14), Mode::Train), 1e-4);
}

TEST(BilinearResize, SameSizeIsIdentity) {
  nn::BilinearResize<double> same(5, 6);
  const auto x = check::random_tensor<double>(Shape{1, 1, 5, 6}, 15);
  const auto y = same.forward(x, Mode::Eval);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-15);
}

TEST(Bottleneck, GradientsMatchFiniteDifferences) {
  nn::Rng rng(16);
  nn::Bottleneck<double> block("b", 4, 2, 2, rng);
  EXPECT_EQ(block.out_channels(), 8);
  EXPECT_LT(check::check_layer_gradients(block, check::random_tensor<double>(Shape{2, 4, 6, 6}, 17), Mode::Train), 1e-4);
}

TEST(Sequential, ConvBnReluStackGradients) {
  nn::Rng rng(18);
  nn::Sequential<double> seq;
  nn::add_conv_bn_relu(seq, "s", 2, 3, 1, rng);
  EXPECT_EQ(seq.size(), 3u);
  EXPECT_LT(check::check_layer_gradients(seq, check::random_tensor<double>(Shape{2, 2, 5, 5}, 19), Mode::Train), 1e-4);
}
