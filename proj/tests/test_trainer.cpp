#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "freqpad/data/synthetic.hpp"
#include "freqpad/error.hpp"
#include "freqpad/train/checkpoint.hpp"
#include "freqpad/train/config.hpp"
#include "freqpad/train/experiments.hpp"
#include "freqpad/train/trainer.hpp"
#include "oracles.hpp"

using namespace freqpad;
using namespace freqpad::train;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// A small corpus shared by the training tests, generated once per process.
const data::SampleManifest& corpus() {
  static const data::SampleManifest m = [] {
    const fs::path dir = fs::temp_directory_path() / "freqpad_test_trainer_corpus";
    fs::remove_all(dir);
    data::SyntheticSpec spec;
    spec.n_videos_per_class = 10;
    spec.frames_per_video = 2;
    spec.image_size = 32;
    spec.seed = 4;
    data::generate_synthetic(spec, dir);
    return data::read_manifest(dir / "manifest.csv");
  }();
  return m;
}

TrainConfig small_config(const std::string& out) {
  TrainConfig cfg;
  cfg.model.backbone = network::BackboneSpec::tiny(32);
  cfg.model.input_size = 32;
  cfg.data.frames_per_video = 2;
  cfg.data.augment = false;
  cfg.optim.batch_size = 8;
  cfg.optim.max_epochs = 3;
  cfg.eval_batch_size = 16;
  cfg.seed = 9;
  cfg.output_dir = (fs::temp_directory_path() / ("freqpad_test_trainer_" + out)).string();
  fs::remove_all(cfg.output_dir);
  return cfg;
}

data::SampleRecord rec(const std::string& dataset, const std::string& video, data::Label label, data::Split split) {
  data::SampleRecord r;
  r.dataset_id = dataset;
  r.video_id = video;
  r.frame_path = video + ".png";
  r.label = label;
  r.pai = label == data::Label::BonaFide ? "none" : "print";
  r.split = split;
  return r;
}

}  // namespace

TEST(Schedule, LearningRateDecay) {
  const OptimConfig o;
  EXPECT_EQ(lr_at(0, o), 0.001);
  EXPECT_NEAR(lr_at(1, o), 0.000995, 1e-18);
  double prev = lr_at(0, o);
  for (int e = 1; e < 2000; ++e) {
    const double lr = lr_at(e, o);
    EXPECT_LT(lr, prev);
    EXPECT_GT(lr, 0.0);
    prev = lr;
  }
  EXPECT_LT(lr_at(5000, o), 1e-12);
}

TEST(Config, DefaultsMatchPublishedHyperparameters) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.optim.lr0, 0.001);
  EXPECT_EQ(cfg.optim.momentum, 0.9);
  EXPECT_EQ(cfg.optim.weight_decay, 0.0001);
  EXPECT_EQ(cfg.optim.lr_decay_gamma, 0.995);
  EXPECT_EQ(cfg.optim.batch_size, 32);
  EXPECT_EQ(cfg.optim.patience, 15);
  EXPECT_EQ(cfg.loss_weights.gamma, 2.0);
  EXPECT_EQ(cfg.data.frames_per_video, 10);
  EXPECT_EQ(cfg.model.pixel_map_size, 14);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, JsonRoundTripAndStrictKeys) {
  TrainConfig cfg;
  cfg.optim.lr0 = 0.01;
  cfg.data.datasets = {"a", "b"};
  cfg.monitor = Monitor::DevAcer;
  const json j = to_json(cfg);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  json unknown = j;
  unknown["optim"]["learning_rate"] = 0.1;
  EXPECT_THROW(config_from_json(unknown), ValidationError);
  json top = j;
  top["epochs"] = 3;
  EXPECT_THROW(config_from_json(top), ValidationError);
}

TEST(Config, OverridesParseJsonOrString) {
  json j = to_json(TrainConfig{});
  apply_override(j, "optim.max_epochs=7");
  apply_override(j, "model.backbone=resnet50");
  apply_override(j, "data.datasets=[\"x\",\"y\"]");
  apply_override(j, "model.use_ham=false");
  const auto cfg = config_from_json(j);
  EXPECT_EQ(cfg.optim.max_epochs, 7);
  EXPECT_EQ(cfg.model.backbone.name, "resnet50");
  EXPECT_EQ(cfg.data.datasets, (std::vector<std::string>{"x", "y"}));
  EXPECT_FALSE(cfg.model.use_ham);
  EXPECT_THROW(apply_override(j, "no_equals_sign"), ValidationError);
}

TEST(Config, ValidationRejectsBadValues) {
  auto broken = [](auto edit) {
    TrainConfig cfg;
    edit(cfg);
    return cfg;
  };
  EXPECT_THROW(broken([](TrainConfig& c) { c.optim.lr0 = 0; }).validate(), ValidationError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.optim.batch_size = 0; }).validate(), ValidationError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.optim.lr_decay_gamma = 1.5; }).validate(), ValidationError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.model.input_size = 100; }).validate(), ValidationError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.data.normalization.std[1] = 0; }).validate(), ValidationError);
  EXPECT_NO_THROW(broken([](TrainConfig& c) { c.optim.weight_decay = 0; }).validate());
}

TEST(Presets, SwitchStreamsAttentionAndLoss) {
  TrainConfig rgb;
  apply_preset(rgb, "rgb_bce");
  EXPECT_FALSE(rgb.model.use_mfd);
  EXPECT_FALSE(rgb.model.use_ham);
  EXPECT_EQ(rgb.loss_kind, losses::LossKind::Bce);
  network::ModelConfig mc = rgb.model;
  mc.backbone = network::BackboneSpec::tiny(64);
  mc.input_size = 64;
  network::PadModel<float> model(mc);
  EXPECT_EQ(model.stream_count(), 1);
  EXPECT_EQ(model.attention_tap_count(), 0);

  TrainConfig full;
  apply_preset(full, "full_flsl");
  json a = to_json(full), b = to_json(TrainConfig{});
  a.erase("preset");
  b.erase("preset");
  EXPECT_EQ(a, b);
  TrainConfig mid;
  apply_preset(mid, "rgb_mfd_bce");
  EXPECT_TRUE(mid.model.use_mfd);
  EXPECT_FALSE(mid.model.use_ham);
  EXPECT_THROW(apply_preset(mid, "rgb_focal"), ValidationError);
}

TEST(Sgd, MomentumAndDecayByHand) {
  nn::Parameter<float> w("w", Tensor<float>(Shape{1, 1, 1, 2}));
  nn::Parameter<float> b("b", Tensor<float>(Shape{1, 1, 1, 1}), false);
  w.value[0] = 1.0f;
  w.value[1] = 2.0f;
  b.value[0] = 1.0f;
  Sgd sgd({&w, &b}, 0.9, 0.1);
  for (int step = 0; step < 2; ++step) {
    w.grad[0] = 0.5f;
    w.grad[1] = -1.0f;
    b.grad[0] = 0.5f;
    sgd.step(0.1);
  }
  // step 1: v = g + 0.1 w = (0.6, -0.8); w = (0.94, 2.08)
  // step 2: v = 0.9 (0.6, -0.8) + (0.594, -0.792) = (1.134, -1.512); w = (0.8266, 2.2312)
  EXPECT_NEAR(w.value[0], 0.8266f, 1e-6f);
  EXPECT_NEAR(w.value[1], 2.2312f, 1e-6f);
  // No decay on b: v = 0.5 then 0.95; b = 1 - 0.05 - 0.095
  EXPECT_NEAR(b.value[0], 0.855f, 1e-6f);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto cfg = small_config("ckpt");
  fs::create_directories(cfg.output_dir);
  network::PadModel<float> model(cfg.model);
  // Move parameters and running statistics away from their initial values.
  auto x = check::random_tensor<float>(Shape{4, 3, 32, 32}, 1);
  model.forward(x, nn::Mode::Train);
  for (auto* p : model.parameters())
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += 1e-3f * static_cast<float>(i % 5);
  const fs::path path = fs::path(cfg.output_dir) / "m.ckpt";
  save_checkpoint(path, model, cfg, json{{"epoch", 3}});
  auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.meta.training.at("epoch"), 3);
  EXPECT_EQ(to_json(loaded.meta.config), to_json(cfg));
  auto pa = model.parameters(), pb = loaded.model->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k)
    for (std::size_t i = 0; i < pa[k]->value.size(); ++i) ASSERT_EQ(pa[k]->value[i], pb[k]->value[i]) << pa[k]->name;
  auto ba = model.buffers(), bb = loaded.model->buffers();
  for (std::size_t k = 0; k < ba.size(); ++k)
    for (std::size_t i = 0; i < ba[k]->value.size(); ++i) ASSERT_EQ(ba[k]->value[i], bb[k]->value[i]);
  const auto ya = model.forward(x, nn::Mode::Eval), yb = loaded.model->forward(x, nn::Mode::Eval);
  for (std::size_t i = 0; i < ya.pixel_logits.size(); ++i) EXPECT_EQ(ya.pixel_logits[i], yb.pixel_logits[i]);

  network::PadModel<float> fresh(cfg.model);
  EXPECT_EQ(load_matching_weights(path, fresh), pa.size() + ba.size());
}

TEST(Checkpoint, CorruptionAndMismatchAreRejected) {
  auto cfg = small_config("ckpt_bad");
  fs::create_directories(cfg.output_dir);
  network::PadModel<float> model(cfg.model);
  const fs::path path = fs::path(cfg.output_dir) / "m.ckpt";
  save_checkpoint(path, model, cfg);
  std::string bytes = slurp(path);
  bytes[bytes.size() - 3] ^= 0x5a;
  std::ofstream(fs::path(cfg.output_dir) / "flipped.ckpt", std::ios::binary) << bytes;
  EXPECT_THROW(load_checkpoint(fs::path(cfg.output_dir) / "flipped.ckpt"), ValidationError);
  std::ofstream(fs::path(cfg.output_dir) / "short.ckpt", std::ios::binary) << bytes.substr(0, 40);
  EXPECT_THROW(load_checkpoint(fs::path(cfg.output_dir) / "short.ckpt"), ValidationError);
  EXPECT_THROW(load_checkpoint(fs::path(cfg.output_dir) / "absent.ckpt"), ValidationError);
  // A single-stream model shares only the RGB stream and heads it can match.
  network::ModelConfig rgb = cfg.model;
  rgb.use_mfd = false;
  rgb.use_ham = false;
  network::PadModel<float> other(rgb);
  EXPECT_LT(load_matching_weights(path, other), model.parameters().size() + model.buffers().size());
}

TEST(Train, WritesArtifactsAndStepsLambdaAtEpochFive) {
  auto cfg = small_config("lambda");
  cfg.optim.max_epochs = 6;
  cfg.optim.patience = 100;
  const auto result = train::train(cfg, corpus());
  ASSERT_EQ(result.log.size(), 6u);
  EXPECT_EQ(result.log[4].lambda1, 1.0);
  EXPECT_EQ(result.log[5].lambda1, 100.0);
  EXPECT_NEAR(result.log[1].lr, 0.000995, 1e-15);
  EXPECT_TRUE(fs::exists(result.checkpoint));
  EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "resolved_config.json"));
  std::ifstream log(result.log_path);
  int lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("epoch"), lines);
    EXPECT_TRUE(j.contains("dev_loss") && j.contains("lambda1") && j.contains("lr"));
  }
  EXPECT_EQ(lines, 6);
  // The early-stopping monitor uses the epoch-0 weights, so it stays comparable across the step.
  EXPECT_LT(result.log[5].dev_monitor, 10.0 * result.log[4].dev_monitor);
}

TEST(Train, EarlyStoppingContract) {
  auto cfg = small_config("patience");
  cfg.optim.max_epochs = 12;
  cfg.optim.patience = 2;
  cfg.optim.lr0 = 1e-6;
  const auto result = train::train(cfg, corpus());
  const int n = static_cast<int>(result.log.size());
  ASSERT_GE(n, 1);
  EXPECT_LE(n, cfg.optim.max_epochs);
  int last_improved = -1;
  for (const auto& e : result.log)
    if (e.improved) last_improved = e.epoch;
  EXPECT_EQ(result.best_epoch, last_improved);
  if (result.early_stopped) {
    EXPECT_EQ(n, last_improved + cfg.optim.patience + 1);
    EXPECT_EQ(result.log.back().epochs_since_improve, cfg.optim.patience);
  } else {
    EXPECT_EQ(n, cfg.optim.max_epochs);
  }
  for (const auto& e : result.log) EXPECT_LT(e.epochs_since_improve, cfg.optim.patience + 1);
}

TEST(Train, SeededRunsAreIdentical) {
  auto a = small_config("det_a");
  auto b = small_config("det_b");
  a.data.augment = b.data.augment = true;
  const auto ra = train::train(a, corpus());
  const auto rb = train::train(b, corpus());
  EXPECT_EQ(slurp(ra.log_path), slurp(rb.log_path));
  EXPECT_EQ(ra.log.back().dev_loss, rb.log.back().dev_loss);
}

TEST(Train, DivergenceIsReported) {
  auto cfg = small_config("diverge");
  cfg.optim.lr0 = 1e30;
  cfg.optim.max_epochs = 4;
  EXPECT_THROW(train::train(cfg, corpus()), DivergenceError);
}

TEST(Train, MissingClassIsAValidationError) {
  auto cfg = small_config("one_class");
  const auto only_bona = data::filter_manifest(corpus(), {}, {}, {"no_such_pai"});
  EXPECT_THROW(train::train(cfg, only_bona), ValidationError);
}

TEST(Protocol, FoldValidation) {
  ProtocolConfig cross;
  cross.kind = ProtocolKind::Cross;
  FoldSpec fold{"f", {"A", "B"}, {"C"}, {}, {}, std::nullopt};
  data::SampleManifest train_side, test_side;
  for (auto split : {data::Split::Train, data::Split::Dev}) {
    train_side.records.push_back(rec("A", "a1" + data::to_string(split), data::Label::BonaFide, split));
    train_side.records.push_back(rec("B", "b1" + data::to_string(split), data::Label::Attack, split));
  }
  test_side.records.push_back(rec("C", "c1", data::Label::BonaFide, data::Split::Test));
  test_side.records.push_back(rec("C", "c2", data::Label::Attack, data::Split::Test));
  EXPECT_NO_THROW(validate_fold(cross, fold, train_side, test_side));

  FoldSpec overlapping = fold;
  overlapping.test_datasets = {"B"};
  EXPECT_THROW(validate_fold(cross, overlapping, train_side, test_side), ValidationError);

  auto leaked = test_side;
  leaked.records.push_back(rec("A", "a1train", data::Label::BonaFide, data::Split::Test));
  EXPECT_THROW(validate_fold(cross, fold, train_side, leaked), ValidationError);

  auto one_class = test_side;
  one_class.records.pop_back();
  EXPECT_THROW(validate_fold(cross, fold, train_side, one_class), ValidationError);

  auto no_dev = data::filter_manifest(train_side, {data::Split::Train});
  EXPECT_THROW(validate_fold(cross, fold, no_dev, test_side), ValidationError);

  ProtocolConfig intra;
  intra.kind = ProtocolKind::Intra;
  FoldSpec same{"p", {"A"}, {"A"}, {}, {}, std::nullopt};
  auto intra_test = test_side;
  for (auto& r : intra_test.records) r.dataset_id = "A";
  EXPECT_NO_THROW(validate_fold(intra, same, train_side, intra_test));
}

TEST(Protocol, ConfigParsingIsStrict) {
  const json j = {{"schema_version", 1},
                  {"name", "lodo"},
                  {"kind", "cross"},
                  {"folds", json::array({{{"name", "f"}, {"train_datasets", {"A"}}, {"test_datasets", {"B"}}}})}};
  const auto p = protocol_from_json(j);
  EXPECT_EQ(p.folds.size(), 1u);
  EXPECT_EQ(p.kind, ProtocolKind::Cross);
  EXPECT_EQ(protocol_from_json(to_json(p)).folds[0].test_datasets, p.folds[0].test_datasets);
  json bad = j;
  bad["folds"][0]["test_set"] = "B";
  EXPECT_THROW(protocol_from_json(bad), ValidationError);
  json empty = j;
  empty["folds"] = json::array();
  EXPECT_THROW(protocol_from_json(empty), ValidationError);
}
