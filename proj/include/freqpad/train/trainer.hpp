#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqpad/data/dataset.hpp"
#include "freqpad/eval/metrics.hpp"
#include "freqpad/network/model.hpp"
#include "freqpad/train/config.hpp"

namespace freqpad::train {

// SGD with momentum and L2 weight decay, PyTorch semantics:
// g += wd * w (decayed parameters only); v = mu * v + g; w -= lr * v.
class Sgd {
 public:
  Sgd(std::vector<nn::Parameter<float>*> params, double momentum, double weight_decay);
  void step(double lr);
  const std::vector<Tensor<float>>& velocity() const { return velocity_; }

 private:
  std::vector<nn::Parameter<float>*> params_;
  std::vector<Tensor<float>> velocity_;
  double momentum_;
  double weight_decay_;
};

struct EvalResult {
  double loss = 0.0;  // at the requested epoch's loss weights
  double pixel_loss = 0.0;
  double binary_loss = 0.0;
  std::vector<eval::ScoreRecord> videos;
  std::vector<std::size_t> frame_records;
  std::vector<network::Prediction> frames;  // embeddings kept only when requested
};

// Forward-only pass over every record of `manifest` in order. Losses are
// averaged over frames; frame scores are mean-fused per video.
EvalResult evaluate(network::PadModel<float>& model, const TrainConfig& cfg, const data::SampleManifest& manifest,
                    int loss_epoch, std::vector<data::LoadIssue>& issues, bool keep_embeddings = false);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double lambda1 = 0.0;
  double train_loss = 0.0;
  double train_pixel = 0.0;
  double train_binary = 0.0;
  double dev_loss = 0.0;
  double dev_pixel = 0.0;
  double dev_binary = 0.0;
  double dev_monitor = 0.0;  // the quantity early stopping compares
  double dev_acer = 0.0;
  double dev_auc = 0.0;
  bool improved = false;
  int epochs_since_improve = 0;
};
nlohmann::json to_json(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_monitor = 0.0;
  bool early_stopped = false;
  std::filesystem::path checkpoint;
  std::filesystem::path log_path;
  std::vector<data::LoadIssue> issues;
};

// Frame selection shared by train/eval: k sampled frames per video, filtered
// to the configured datasets and PAIs, then restricted to `split`.
data::SampleManifest select_split(const data::SampleManifest& manifest, const TrainConfig& cfg, data::Split split);

using ProgressFn = std::function<void(const EpochLog&)>;

// Trains on the train split, monitors the dev split, writes
// <output_dir>/{resolved_config.json, train_log.jsonl, best.ckpt}.
// Throws DivergenceError on a non-finite loss or gradient.
TrainResult train(const TrainConfig& cfg, const data::SampleManifest& manifest, const ProgressFn& progress = {});

// Scores `eval_set` and reports metrics at the EER threshold of
// `threshold_set` (the evaluation set itself when null).
struct SplitEvaluation {
  eval::MetricReport report;
  EvalResult eval;
};
SplitEvaluation evaluate_split(network::PadModel<float>& model, const TrainConfig& cfg,
                               const data::SampleManifest& eval_set, const data::SampleManifest* threshold_set,
                               std::vector<data::LoadIssue>& issues, const std::string& name = {});

}  // namespace freqpad::train
