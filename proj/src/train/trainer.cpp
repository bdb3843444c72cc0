#include "freqpad/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "freqpad/error.hpp"
#include "freqpad/losses/losses.hpp"
#include "freqpad/train/checkpoint.hpp"

namespace freqpad::train {

using nlohmann::json;

namespace {

double weighted_total(const TrainConfig& cfg, int epoch, double pixel, double binary) {
  if (cfg.loss_kind == losses::LossKind::Bce) return 0.5 * pixel + 0.5 * binary;
  return losses::overall_loss(pixel, binary, epoch, cfg.loss_weights);
}

bool has_both_classes(const data::SampleManifest& m) {
  bool bona = false, attack = false;
  for (const auto& r : m.records) (r.label == data::Label::BonaFide ? bona : attack) = true;
  return bona && attack;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Sgd::Sgd(std::vector<nn::Parameter<float>*> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (auto* p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::step(double lr) {
  const float mu = static_cast<float>(momentum_), wd = static_cast<float>(weight_decay_), rate = static_cast<float>(lr);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* v = velocity_[k].data();
    const float decay = p.weight_decay ? wd : 0.0f;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = mu * v[i] + (g[i] + decay * w[i]);
      w[i] -= rate * v[i];
    }
  }
}

EvalResult evaluate(network::PadModel<float>& model, const TrainConfig& cfg, const data::SampleManifest& manifest,
                    int loss_epoch, std::vector<data::LoadIssue>& issues, bool keep_embeddings) {
  const data::FrameLoader loader(manifest, cfg.model.input_size, cfg.data.normalization);
  EvalResult out;
  std::size_t frames = 0;
  for (std::size_t start = 0; start < loader.size(); start += static_cast<std::size_t>(cfg.eval_batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(loader.size(), start + cfg.eval_batch_size); ++i) idx.push_back(i);
    const data::Batch batch = loader.load(idx, 0, issues);
    if (batch.labels.empty()) continue;
    const auto output = model.forward(batch.images, nn::Mode::Eval);
    const auto bl = losses::batch_loss<float>(output.pixel_logits, output.binary_logits, batch.labels, cfg.loss_kind,
                                              cfg.loss_weights, loss_epoch);
    const double n = static_cast<double>(batch.labels.size());
    out.pixel_loss += bl.pixel * n;
    out.binary_loss += bl.binary * n;
    frames += batch.labels.size();
    std::vector<std::string> ids;
    for (std::size_t r : batch.records) ids.push_back(manifest.records[r].frame_path);
    auto preds = network::to_predictions(output, std::span<const std::string>(ids));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!keep_embeddings) preds[i].embedding.clear();
      out.frames.push_back(std::move(preds[i]));
      out.frame_records.push_back(batch.records[i]);
    }
  }
  require(frames > 0, "evaluate: no frame could be loaded");
  out.pixel_loss /= static_cast<double>(frames);
  out.binary_loss /= static_cast<double>(frames);
  out.loss = weighted_total(cfg, loss_epoch, out.pixel_loss, out.binary_loss);
  if (!std::isfinite(out.loss)) throw DivergenceError("evaluation loss is not finite");

  // Mean-rule fusion per (dataset, video), in order of first appearance.
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<std::vector<network::Prediction>> groups;
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    const auto& rec = manifest.records[out.frame_records[i]];
    auto [it, inserted] = slot.try_emplace({rec.dataset_id, rec.video_id}, groups.size());
    if (inserted) {
      groups.emplace_back();
      out.videos.push_back({rec.video_id, 0.0, rec.label, rec.pai, rec.dataset_id});
    }
    groups[it->second].push_back(out.frames[i]);
  }
  for (std::size_t v = 0; v < groups.size(); ++v)
    out.videos[v].score = network::predict_video(groups[v], cfg.video_score_rule);
  return out;
}

json to_json(const EpochLog& l) {
  return {{"epoch", l.epoch},
          {"lr", l.lr},
          {"lambda1", l.lambda1},
          {"train_loss", l.train_loss},
          {"train_pixel", l.train_pixel},
          {"train_binary", l.train_binary},
          {"dev_loss", l.dev_loss},
          {"dev_pixel", l.dev_pixel},
          {"dev_binary", l.dev_binary},
          {"dev_monitor", l.dev_monitor},
          {"dev_acer", finite_or_null(l.dev_acer)},
          {"dev_auc", finite_or_null(l.dev_auc)},
          {"improved", l.improved},
          {"epochs_since_improve", l.epochs_since_improve}};
}

data::SampleManifest select_split(const data::SampleManifest& manifest, const TrainConfig& cfg, data::Split split) {
  const auto filtered = data::filter_manifest(manifest, {}, cfg.data.datasets, cfg.data.pais);
  const auto sampled = data::sample_video_frames(filtered, cfg.data.frames_per_video);
  return data::filter_manifest(sampled, {split});
}

TrainResult train(const TrainConfig& cfg, const data::SampleManifest& manifest, const ProgressFn& progress) {
  cfg.validate();
  const std::filesystem::path out_dir = cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, "train: cannot create output directory " + out_dir.string());
  {
    std::ofstream frozen(out_dir / "resolved_config.json");
    require(static_cast<bool>(frozen), "train: cannot write resolved config");
    frozen << to_json(cfg).dump(2) << '\n';
  }

  const auto filtered = data::filter_manifest(manifest, {}, cfg.data.datasets, cfg.data.pais);
  const auto sampled = data::sample_video_frames(filtered, cfg.data.frames_per_video);
  const auto train_set = data::filter_manifest(cfg.data.balance ? data::balance_classes(sampled) : sampled, {data::Split::Train});
  const auto dev_set = data::filter_manifest(sampled, {data::Split::Dev});
  require(has_both_classes(train_set), "train: the train split needs bona fide and attack records");
  require(has_both_classes(dev_set), "train: the dev split needs bona fide and attack records");

  network::PadModel<float> model(cfg.model);
  if (const auto& path = cfg.model.backbone.pretrained_weights_path) {
    require(load_matching_weights(*path, model) > 0, "train: no tensor in " + *path + " matches the model");
  }
  Sgd sgd(model.parameters(), cfg.optim.momentum, cfg.optim.weight_decay);
  const data::FrameLoader loader(train_set, cfg.model.input_size, cfg.data.normalization,
                                 cfg.data.augment ? data::AugmentConfig{} : data::AugmentConfig::disabled(),
                                 data::mix_seed(cfg.seed, 0xa06u));

  TrainResult result;
  result.checkpoint = out_dir / "best.ckpt";
  result.log_path = out_dir / "train_log.jsonl";
  std::ofstream log(result.log_path, std::ios::trunc);
  require(static_cast<bool>(log), "train: cannot write " + result.log_path.string());

  int since = 0;
  for (int epoch = 0; epoch < cfg.optim.max_epochs; ++epoch) {
    EpochLog e;
    e.epoch = epoch;
    e.lr = lr_at(epoch, cfg.optim);
    e.lambda1 = cfg.loss_kind == losses::LossKind::Bce ? 0.5 : cfg.loss_weights.lambda1_at(epoch);

    const auto order = data::epoch_order(loader.size(), cfg.seed, epoch);
    std::size_t frames = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.optim.batch_size)) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min<std::size_t>(cfg.optim.batch_size, order.size() - start));
      const data::Batch batch = loader.load(idx, epoch, result.issues);
      if (batch.labels.empty()) continue;
      const std::string where = " at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(start / cfg.optim.batch_size);
      network::ModelOutput<float> output;
      try {
        output = model.forward(batch.images, nn::Mode::Train);
      } catch (const ValidationError& err) {
        // Batch shapes are fixed by construction, so a rejected activation is non-finite.
        throw DivergenceError(std::string("non-finite activations") + where + ": " + err.what());
      }
      const auto bl = losses::batch_loss<float>(output.pixel_logits, output.binary_logits, batch.labels, cfg.loss_kind,
                                                cfg.loss_weights, epoch);
      if (!std::isfinite(bl.total)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(start / cfg.optim.batch_size));
      }
      model.zero_grad();
      model.backward(bl.grad_pixel_logits.cast<float>(), bl.grad_binary_logits.cast<float>());
      for (auto* p : model.parameters()) {
        if (!p->grad.all_finite())
          throw DivergenceError("non-finite gradient for '" + p->name + "' at epoch " + std::to_string(epoch));
      }
      sgd.step(e.lr);
      for (auto* p : model.parameters()) {
        if (!p->value.all_finite()) throw DivergenceError("non-finite parameter '" + p->name + "'" + where);
      }
      const double n = static_cast<double>(batch.labels.size());
      e.train_pixel += bl.pixel * n;
      e.train_binary += bl.binary * n;
      frames += batch.labels.size();
    }
    require(frames > 0, "train: no training frame could be loaded");
    e.train_pixel /= static_cast<double>(frames);
    e.train_binary /= static_cast<double>(frames);
    e.train_loss = weighted_total(cfg, epoch, e.train_pixel, e.train_binary);

    const EvalResult dev = evaluate(model, cfg, dev_set, epoch, result.issues);
    e.dev_pixel = dev.pixel_loss;
    e.dev_binary = dev.binary_loss;
    e.dev_loss = dev.loss;
    const auto report = eval::compute_report(dev.videos, eval::eer_threshold(dev.videos));
    e.dev_acer = report.acer;
    e.dev_auc = report.auc;
    // Loss weights frozen at epoch 0 so the lambda1 step does not read as a regression.
    e.dev_monitor = cfg.monitor == Monitor::DevLoss ? weighted_total(cfg, 0, dev.pixel_loss, dev.binary_loss) : report.acer;

    e.improved = result.best_epoch < 0 || e.dev_monitor < result.best_monitor;
    if (e.improved) {
      since = 0;
      result.best_epoch = epoch;
      result.best_monitor = e.dev_monitor;
      save_checkpoint(result.checkpoint, model, cfg,
                      {{"epoch", epoch}, {"monitor", to_string(cfg.monitor)}, {"monitor_value", e.dev_monitor},
                       {"dev_acer", e.dev_acer}, {"dev_auc", e.dev_auc}, {"dev_threshold", report.threshold}});
    } else {
      ++since;
    }
    e.epochs_since_improve = since;
    log << to_json(e).dump() << '\n';
    log.flush();
    result.log.push_back(e);
    if (progress) progress(e);
    if (since >= cfg.optim.patience) {
      result.early_stopped = true;
      break;
    }
  }

  if (!result.issues.empty()) {
    json issues = json::array();
    for (const auto& i : result.issues) issues.push_back({{"record", i.record}, {"frame_path", i.frame_path}, {"message", i.message}});
    std::ofstream(out_dir / "load_issues.json") << issues.dump(2) << '\n';
  }
  return result;
}

SplitEvaluation evaluate_split(network::PadModel<float>& model, const TrainConfig& cfg,
                               const data::SampleManifest& eval_set, const data::SampleManifest* threshold_set,
                               std::vector<data::LoadIssue>& issues, const std::string& name) {
  SplitEvaluation out;
  out.eval = evaluate(model, cfg, eval_set, 0, issues);
  double threshold = 0.0;
  if (threshold_set) {
    const auto ref = evaluate(model, cfg, *threshold_set, 0, issues);
    threshold = eval::eer_threshold(ref.videos);
  } else {
    threshold = eval::eer_threshold(out.eval.videos);
  }
  out.report = eval::compute_report(out.eval.videos, threshold, name);
  return out;
}

}  // namespace freqpad::train
