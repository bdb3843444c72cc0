#include "freqpad/network/model.hpp"

#include <cmath>
#include <numeric>

namespace freqpad::network {

namespace {

template <typename T>
T sigmoid(T z) {
  return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

int head_channels(const ModelConfig& cfg) {
  const auto& ch = cfg.backbone.stage_channels;
  return ch[0] + ch[1] + ch[2];
}

ModelConfig validated(ModelConfig cfg) {
  const BackboneSpec expected = BackboneSpec::named(cfg.backbone.name, cfg.input_size);
  require(cfg.backbone.stage_channels == expected.stage_channels &&
              cfg.backbone.stage_spatial == expected.stage_spatial,
          "backbone spec does not match input size " + std::to_string(cfg.input_size));
  require(cfg.in_channels >= 1, "model needs at least one input channel");
  require(cfg.pixel_map_size >= 1, "pixel map size must be positive");
  require(head_channels(cfg) % 4 == 0, "pixel head channel count must be divisible by 4");
  return cfg;
}

}  // namespace

VideoScoreRule parse_video_score_rule(const std::string& text) {
  if (text == "binary") return VideoScoreRule::Binary;
  if (text == "pixel_mean") return VideoScoreRule::PixelMean;
  if (text == "average") return VideoScoreRule::Average;
  throw ValidationError("unknown video score rule '" + text + "'");
}

std::string to_string(VideoScoreRule rule) {
  switch (rule) {
    case VideoScoreRule::Binary: return "binary";
    case VideoScoreRule::PixelMean: return "pixel_mean";
    case VideoScoreRule::Average: return "average";
  }
  return "?";
}

template <typename T>
Tensor<T> fuse_stage(const Tensor<T>& rgb_feature, const Tensor<T>& mfd_feature) {
  require(rgb_feature.shape() == mfd_feature.shape(),
          "fuse_stage: shape mismatch " + rgb_feature.shape().str() + " vs " + mfd_feature.shape().str());
  return rgb_feature + mfd_feature;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  Shape s = parts.front().shape();
  s.c = 0;
  for (const auto& p : parts) {
    require(p.n() == s.n && p.h() == s.h && p.w() == s.w, "concat_channels: shape mismatch");
    s.c += p.c();
  }
  Tensor<T> out(s);
  for (int n = 0; n < s.n; ++n) {
    T* dst = out.sample(n);
    for (const auto& p : parts) dst = std::copy_n(p.sample(n), p.shape().sample(), dst);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& tensor, std::span<const int> sizes) {
  require(std::accumulate(sizes.begin(), sizes.end(), 0) == tensor.c(), "split_channels: sizes do not sum");
  std::vector<Tensor<T>> parts;
  for (int c : sizes) parts.emplace_back(Shape{tensor.n(), c, tensor.h(), tensor.w()});
  for (int n = 0; n < tensor.n(); ++n) {
    const T* src = tensor.sample(n);
    for (auto& p : parts) {
      std::copy_n(src, p.shape().sample(), p.sample(n));
      src += p.shape().sample();
    }
  }
  return parts;
}

template <typename T>
PadModel<T>::PadModel(const ModelConfig& config)
    : config_(validated(config)),
      rng_(config.seed),
      rgb_stream_(config_.backbone, config_.in_channels, "rgb", rng_, false),
      resize_{nn::BilinearResize<T>(config_.pixel_map_size, config_.pixel_map_size),
              nn::BilinearResize<T>(config_.pixel_map_size, config_.pixel_map_size),
              nn::BilinearResize<T>(config_.pixel_map_size, config_.pixel_map_size)} {
  const auto& ch = config_.backbone.stage_channels;
  if (config_.use_mfd) {
    mfd_ = std::make_unique<freq::MfdLayer<T>>(freq::init_filter_bank<T>(
        config_.input_size, config_.input_size, config_.seed, config_.band_geometry));
    mfd_->set_input_grad(false);
    mfd_stream_ = std::make_unique<Backbone<T>>(config_.backbone, freq::FilterBank<T>::kBands * config_.in_channels,
                                                "mfd", rng_, true);
  }
  if (config_.use_ham) {
    spatial_att_1_ = std::make_unique<attention::SpatialAttention<T>>("ham.spatial1",
                                                                      attention::SpatialAttentionConfig{7}, rng_);
    spatial_att_2_ = std::make_unique<attention::SpatialAttention<T>>("ham.spatial2",
                                                                      attention::SpatialAttentionConfig{5}, rng_);
    channel_att_ = std::make_unique<attention::ChannelAttention<T>>(
        "ham.channel3", attention::ChannelAttentionConfig{ch[2], config_.reduction_ratio}, rng_);
  }
  const int head_in = head_channels(config_);
  pixel_head_.template add<nn::Conv2d<T>>("pixel_head.conv1", nn::ConvSpec{head_in, head_in / 4, 3, 1, 1, true}, rng_);
  pixel_head_.template add<nn::ReLU<T>>();
  pixel_head_.template add<nn::Conv2d<T>>("pixel_head.conv2", nn::ConvSpec{head_in / 4, 1, 3, 1, 1, true}, rng_);
  classifier_ = std::make_unique<nn::Linear<T>>("classifier", embedding_size(), 1, rng_);
}

template <typename T>
attention::SpatialAttention<T>* PadModel<T>::spatial_attention(int index) {
  return index == 1 ? spatial_att_1_.get() : index == 2 ? spatial_att_2_.get() : nullptr;
}

template <typename T>
ModelOutput<T> PadModel<T>::forward(const Tensor<T>& rgb, nn::Mode mode) {
  require(rgb.c() == config_.in_channels && rgb.h() == config_.input_size && rgb.w() == config_.input_size,
          "model expects N x " + std::to_string(config_.in_channels) + " x " + std::to_string(config_.input_size) +
              " x " + std::to_string(config_.input_size) + " input, got " + rgb.shape().str());
  auto taps = rgb_stream_.forward(rgb, mode);
  typename Backbone<T>::Taps mfd_taps;
  if (mfd_) mfd_taps = mfd_stream_->forward(mfd_->forward(rgb, mode), mode);

  std::array<Tensor<T>, 3> resized;
  for (int s = 0; s < 3; ++s) {
    fused_[s] = mfd_ ? fuse_stage(taps[s], mfd_taps[s]) : taps[s];
    if (config_.use_ham) {
      nn::Layer<T>& att = s == 0 ? static_cast<nn::Layer<T>&>(*spatial_att_1_)
                          : s == 1 ? static_cast<nn::Layer<T>&>(*spatial_att_2_)
                                   : static_cast<nn::Layer<T>&>(*channel_att_);
      attentive_[s] = att.forward(fused_[s], mode);
    } else {
      attentive_[s] = fused_[s];
    }
    resized[s] = resize_[s].forward(attentive_[s], mode);
  }

  ModelOutput<T> out;
  out.pixel_logits = pixel_head_.forward(concat_channels<T>(resized), mode);
  if (mfd_) {
    const std::array<Tensor<T>, 2> pooled{pool_rgb_.forward(taps[3], mode), pool_mfd_.forward(mfd_taps[3], mode)};
    out.embedding = concat_channels<T>(pooled);
  } else {
    out.embedding = pool_rgb_.forward(taps[3], mode);
  }
  out.binary_logits = classifier_->forward(out.embedding, mode);
  return out;
}

template <typename T>
void PadModel<T>::backward(const Tensor<T>& grad_pixel_logits, const Tensor<T>& grad_binary_logits) {
  const auto& ch = config_.backbone.stage_channels;
  const std::array<int, 3> head_sizes{ch[0], ch[1], ch[2]};
  const auto head_grads = split_channels<T>(pixel_head_.backward(grad_pixel_logits), head_sizes);

  typename Backbone<T>::Taps rgb_grads;
  for (int s = 0; s < 3; ++s) {
    Tensor<T> g = resize_[s].backward(head_grads[s]);
    if (config_.use_ham) {
      nn::Layer<T>& att = s == 0 ? static_cast<nn::Layer<T>&>(*spatial_att_1_)
                          : s == 1 ? static_cast<nn::Layer<T>&>(*spatial_att_2_)
                                   : static_cast<nn::Layer<T>&>(*channel_att_);
      g = att.backward(g);
    }
    rgb_grads[s] = std::move(g);
  }

  const Tensor<T> grad_embedding = classifier_->backward(grad_binary_logits);
  if (mfd_) {
    const std::array<int, 2> halves{ch[3], ch[3]};
    const auto pooled_grads = split_channels<T>(grad_embedding, halves);
    typename Backbone<T>::Taps mfd_grads{rgb_grads[0], rgb_grads[1], rgb_grads[2],
                                         pool_mfd_.backward(pooled_grads[1])};
    rgb_grads[3] = pool_rgb_.backward(pooled_grads[0]);
    mfd_->backward(mfd_stream_->backward(mfd_grads));
  } else {
    rgb_grads[3] = pool_rgb_.backward(grad_embedding);
  }
  rgb_stream_.backward(rgb_grads);
}

template <typename T>
std::vector<nn::Parameter<T>*> PadModel<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  rgb_stream_.collect_parameters(out);
  if (mfd_) {
    mfd_->collect_parameters(out);
    mfd_stream_->collect_parameters(out);
  }
  if (config_.use_ham) {
    spatial_att_1_->collect_parameters(out);
    spatial_att_2_->collect_parameters(out);
    channel_att_->collect_parameters(out);
  }
  pixel_head_.collect_parameters(out);
  classifier_->collect_parameters(out);
  return out;
}

template <typename T>
std::vector<nn::Buffer<T>*> PadModel<T>::buffers() {
  std::vector<nn::Buffer<T>*> out;
  rgb_stream_.collect_buffers(out);
  if (mfd_stream_) mfd_stream_->collect_buffers(out);
  return out;
}

template <typename T>
std::size_t PadModel<T>::parameter_count() {
  std::size_t total = 0;
  for (auto* p : parameters()) total += p->value.size();
  return total;
}

template <typename T>
void PadModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::vector<Prediction> to_predictions(const ModelOutput<T>& output, std::span<const std::string> frame_ids) {
  const int n = output.binary_logits.n();
  require(frame_ids.empty() || static_cast<int>(frame_ids.size()) == n, "to_predictions: frame id count");
  std::vector<Prediction> out(n);
  const int h = output.pixel_logits.h(), w = output.pixel_logits.w();
  const int e = static_cast<int>(output.embedding.shape().sample());
  for (int i = 0; i < n; ++i) {
    auto& p = out[i];
    p.pixel_map.resize(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) p.pixel_map(y, x) = sigmoid<double>(output.pixel_logits.at(i, 0, y, x));
    p.binary_prob = sigmoid<double>(output.binary_logits[i]);
    p.embedding.assign(output.embedding.sample(i), output.embedding.sample(i) + e);
    if (!frame_ids.empty()) p.frame_id = frame_ids[i];
  }
  return out;
}

double predict_video(std::span<const Prediction> frames, VideoScoreRule rule) {
  require(!frames.empty(), "predict_video: no frames");
  double binary = 0.0, pixel = 0.0;
  for (const auto& f : frames) {
    binary += f.binary_prob;
    if (rule != VideoScoreRule::Binary) pixel += f.pixel_map.mean();
  }
  binary /= frames.size();
  pixel /= frames.size();
  switch (rule) {
    case VideoScoreRule::Binary: return binary;
    case VideoScoreRule::PixelMean: return pixel;
    case VideoScoreRule::Average: return 0.5 * (binary + pixel);
  }
  return binary;
}

template Tensor<float> fuse_stage<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> fuse_stage<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> concat_channels<float>(std::span<const Tensor<float>>);
template Tensor<double> concat_channels<double>(std::span<const Tensor<double>>);
template std::vector<Tensor<float>> split_channels<float>(const Tensor<float>&, std::span<const int>);
template std::vector<Tensor<double>> split_channels<double>(const Tensor<double>&, std::span<const int>);
template class PadModel<float>;
template class PadModel<double>;
template std::vector<Prediction> to_predictions<float>(const ModelOutput<float>&, std::span<const std::string>);
template std::vector<Prediction> to_predictions<double>(const ModelOutput<double>&, std::span<const std::string>);

}  // namespace freqpad::network
