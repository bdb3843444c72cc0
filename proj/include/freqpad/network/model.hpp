#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "freqpad/attention/attention.hpp"
#include "freqpad/freq/decomposition.hpp"
#include "freqpad/network/backbone.hpp"

namespace freqpad::network {

struct ModelConfig {
  BackboneSpec backbone = BackboneSpec::tiny();
  int input_size = 224;
  int in_channels = 3;
  bool use_mfd = true;   // second stream over the frequency decomposition
  bool use_ham = true;   // attention at the S1/S2/S3 taps
  freq::BandGeometry band_geometry = freq::BandGeometry::AntiDiagonal;
  int reduction_ratio = 16;
  int pixel_map_size = 14;
  std::uint64_t seed = 0;
};

// Raw head outputs (pre-sigmoid).
template <typename T>
struct ModelOutput {
  Tensor<T> pixel_logits;   // N x 1 x 14 x 14
  Tensor<T> binary_logits;  // N x 1 x 1 x 1
  Tensor<T> embedding;      // N x E x 1 x 1, pooled S4 of each stream, concatenated
};

struct Prediction {
  Grid<double> pixel_map;  // sigmoid of the pixel logits
  double binary_prob = 0.0;
  std::vector<float> embedding;
  std::string frame_id;
};

enum class VideoScoreRule { Binary, PixelMean, Average };

VideoScoreRule parse_video_score_rule(const std::string& text);
std::string to_string(VideoScoreRule rule);

// Parameter-free stream fusion: elementwise sum of same-shaped stage features.
template <typename T>
Tensor<T> fuse_stage(const Tensor<T>& rgb_feature, const Tensor<T>& mfd_feature);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& tensor, std::span<const int> sizes);

// Dual-stream PAD network. The RGB stream sees the normalized image; the MFD
// stream sees its 4-band decomposition. Fused S1/S2/S3 features pass through
// spatial(7x7), spatial(5x5) and channel attention as side branches, are
// resized to the pixel-map size, concatenated, and mapped to a 1-channel logit
// map by two 3x3 convolutions. Global-pooled S4 features of both streams feed
// one fully connected logit.
template <typename T>
class PadModel {
 public:
  explicit PadModel(const ModelConfig& config);

  ModelOutput<T> forward(const Tensor<T>& rgb, nn::Mode mode);
  // Accumulates parameter gradients for the last forward.
  void backward(const Tensor<T>& grad_pixel_logits, const Tensor<T>& grad_binary_logits);

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::Buffer<T>*> buffers();
  std::size_t parameter_count();
  void zero_grad();

  const ModelConfig& config() const { return config_; }
  int stream_count() const { return config_.use_mfd ? 2 : 1; }
  int attention_tap_count() const { return config_.use_ham ? 3 : 0; }
  int embedding_size() const { return stream_count() * config_.backbone.stage_channels[3]; }

  freq::MfdLayer<T>* mfd() { return mfd_.get(); }
  attention::SpatialAttention<T>* spatial_attention(int index);
  attention::ChannelAttention<T>* channel_attention() { return channel_att_.get(); }

  // Fused and attentive S1..S3 features of the last forward (pre-resize).
  const std::array<Tensor<T>, 3>& last_fused() const { return fused_; }
  const std::array<Tensor<T>, 3>& last_attentive() const { return attentive_; }

 private:
  ModelConfig config_;
  nn::Rng rng_;
  Backbone<T> rgb_stream_;
  std::unique_ptr<freq::MfdLayer<T>> mfd_;
  std::unique_ptr<Backbone<T>> mfd_stream_;
  std::unique_ptr<attention::SpatialAttention<T>> spatial_att_1_;
  std::unique_ptr<attention::SpatialAttention<T>> spatial_att_2_;
  std::unique_ptr<attention::ChannelAttention<T>> channel_att_;
  std::array<nn::BilinearResize<T>, 3> resize_;
  nn::Sequential<T> pixel_head_;
  nn::GlobalAvgPool<T> pool_rgb_;
  nn::GlobalAvgPool<T> pool_mfd_;
  std::unique_ptr<nn::Linear<T>> classifier_;

  std::array<Tensor<T>, 3> fused_;
  std::array<Tensor<T>, 3> attentive_;
};

template <typename T>
std::vector<Prediction> to_predictions(const ModelOutput<T>& output,
                                       std::span<const std::string> frame_ids = {});

// Mean-rule fusion of frame scores into one video score.
double predict_video(std::span<const Prediction> frames, VideoScoreRule rule = VideoScoreRule::Binary);

}  // namespace freqpad::network
