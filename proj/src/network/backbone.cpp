#include "freqpad/network/backbone.hpp"

namespace freqpad::network {

namespace {

std::array<int, 4> spatial_for(int input_size) {
  require(input_size >= 32 && input_size % 32 == 0,
          "input size must be a positive multiple of 32, got " + std::to_string(input_size));
  return {input_size / 4, input_size / 8, input_size / 16, input_size / 32};
}

}  // namespace

BackboneSpec BackboneSpec::tiny(int input_size) {
  return {"tiny", {16, 32, 64, 128}, spatial_for(input_size), std::nullopt};
}

BackboneSpec BackboneSpec::resnet50(int input_size) {
  return {"resnet50", {256, 512, 1024, 2048}, spatial_for(input_size), std::nullopt};
}

BackboneSpec BackboneSpec::named(const std::string& name, int input_size) {
  if (name == "tiny") return tiny(input_size);
  if (name == "resnet50") return resnet50(input_size);
  throw ValidationError("unknown backbone '" + name + "'");
}

template <typename T>
Backbone<T>::Backbone(const BackboneSpec& spec, int in_channels, const std::string& prefix,
                      nn::Rng& rng, bool input_grad)
    : spec_(spec) {
  const auto& ch = spec.stage_channels;
  if (spec.name == "tiny") {
    nn::add_conv_bn_relu(stages_[0], prefix + ".s1.a", in_channels, ch[0], 2, rng);
    nn::add_conv_bn_relu(stages_[0], prefix + ".s1.b", ch[0], ch[0], 2, rng);
    for (int s = 1; s < 4; ++s) {
      const std::string name = prefix + ".s" + std::to_string(s + 1);
      nn::add_conv_bn_relu(stages_[s], name + ".a", ch[s - 1], ch[s], 2, rng);
      nn::add_conv_bn_relu(stages_[s], name + ".b", ch[s], ch[s], 1, rng);
    }
  } else if (spec.name == "resnet50") {
    require(ch == std::array<int, 4>{256, 512, 1024, 2048}, "resnet50 stage channels are fixed");
    auto& stem = stages_[0];
    stem.template add<nn::Conv2d<T>>(prefix + ".stem.conv", nn::ConvSpec{in_channels, 64, 7, 2, 3, false}, rng);
    stem.template add<nn::BatchNorm2d<T>>(prefix + ".stem.bn", 64);
    stem.template add<nn::ReLU<T>>();
    stem.template add<nn::MaxPool2d<T>>(3, 2, 1);
    const std::array<int, 4> blocks{3, 4, 6, 3};
    int channels = 64;
    for (int s = 0; s < 4; ++s) {
      const int width = 64 << s;
      for (int b = 0; b < blocks[s]; ++b) {
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        auto& block = stages_[s].template add<nn::Bottleneck<T>>(
            prefix + ".layer" + std::to_string(s + 1) + "." + std::to_string(b), channels, width, stride, rng);
        channels = block.out_channels();
      }
    }
  } else {
    throw ValidationError("unknown backbone '" + spec.name + "'");
  }
  stages_[0].set_input_grad(input_grad);
}

template <typename T>
typename Backbone<T>::Taps Backbone<T>::forward(const Tensor<T>& input, nn::Mode mode) {
  Taps taps;
  Tensor<T> x = input;
  for (int s = 0; s < 4; ++s) {
    x = stages_[s].forward(x, mode);
    require(x.c() == spec_.stage_channels[s] && x.h() == spec_.stage_spatial[s],
            spec_.name + " stage " + std::to_string(s + 1) + " produced " + x.shape().str());
    tap_shapes_[s] = x.shape();
    taps[s] = x;
  }
  return taps;
}

template <typename T>
Tensor<T> Backbone<T>::backward(const Taps& tap_grads) {
  Tensor<T> g(tap_shapes_[3]);
  for (int s = 3; s >= 0; --s) {
    if (!tap_grads[s].empty()) g += tap_grads[s];
    g = stages_[s].backward(g);
  }
  return g;
}

template <typename T>
void Backbone<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  for (auto& stage : stages_) stage.collect_parameters(out);
}

template <typename T>
void Backbone<T>::collect_buffers(std::vector<nn::Buffer<T>*>& out) {
  for (auto& stage : stages_) stage.collect_buffers(out);
}

template class Backbone<float>;
template class Backbone<double>;

}  // namespace freqpad::network
