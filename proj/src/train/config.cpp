#include "freqpad/train/config.hpp"

#include <cmath>
#include <fstream>

#include "freqpad/error.hpp"

namespace freqpad::train {

using nlohmann::json;

namespace {

// Every key of `user` must exist in `reference` (recursively for objects).
void check_keys(const json& user, const json& reference, const std::string& path) {
  require(user.is_object(), "config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    require(reference.contains(key), "config: unknown key '" + full + "'");
    if (reference.at(key).is_object()) check_keys(value, reference.at(key), full);
  }
}

template <typename V>
V get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<V>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + section + "." + key + "': " + e.what());
  }
}

}  // namespace

Monitor parse_monitor(const std::string& text) {
  if (text == "dev_loss") return Monitor::DevLoss;
  if (text == "dev_acer") return Monitor::DevAcer;
  throw ValidationError("unknown monitor '" + text + "' (expected dev_loss or dev_acer)");
}

std::string to_string(Monitor monitor) { return monitor == Monitor::DevLoss ? "dev_loss" : "dev_acer"; }

void TrainConfig::validate() const {
  require(schema_version == kConfigSchemaVersion, "config: unsupported schema_version " + std::to_string(schema_version));
  require(optim.lr0 > 0, "config: lr0 must be positive");
  require(optim.momentum >= 0 && optim.momentum < 1, "config: momentum must lie in [0, 1)");
  require(optim.weight_decay >= 0, "config: weight_decay must be non-negative");
  require(optim.lr_decay_gamma > 0 && optim.lr_decay_gamma <= 1, "config: lr_decay_gamma must lie in (0, 1]");
  require(optim.batch_size >= 1 && optim.max_epochs >= 1 && optim.patience >= 1,
          "config: batch_size, max_epochs and patience must be positive");
  require(data.frames_per_video >= 1, "config: frames_per_video must be positive");
  require(eval_batch_size >= 1, "config: eval batch size must be positive");
  require(loss_weights.gamma >= 0 && loss_weights.lambda2 > 0 && loss_weights.lambda1_schedule.initial > 0 &&
              loss_weights.lambda1_schedule.value > 0 && loss_weights.lambda1_schedule.after_epoch >= 0,
          "config: loss weights must be positive");
  for (int c = 0; c < 3; ++c) require(data.normalization.std[c] > 0, "config: normalization std must be positive");
  require(model.in_channels == 3, "config: only 3-channel RGB input is supported");
  // Constructing the spec checks the input size against the stage contract.
  (void)network::BackboneSpec::named(model.backbone.name, model.input_size);
}

json to_json(const TrainConfig& c) {
  const auto& m = c.model;
  const auto& w = c.loss_weights;
  const auto& n = c.data.normalization;
  return {
      {"schema_version", c.schema_version},
      {"preset", c.preset},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"model",
       {{"backbone", m.backbone.name},
        {"input_size", m.input_size},
        {"in_channels", m.in_channels},
        {"use_mfd", m.use_mfd},
        {"use_ham", m.use_ham},
        {"band_geometry", freq::to_string(m.band_geometry)},
        {"reduction_ratio", m.reduction_ratio},
        {"pixel_map_size", m.pixel_map_size},
        {"pretrained_weights", m.backbone.pretrained_weights_path.value_or("")}}},
      {"loss",
       {{"kind", losses::to_string(c.loss_kind)},
        {"gamma", w.gamma},
        {"lambda1_initial", w.lambda1_schedule.initial},
        {"lambda1_after_epoch", w.lambda1_schedule.after_epoch},
        {"lambda1_value", w.lambda1_schedule.value},
        {"lambda2", w.lambda2}}},
      {"optim",
       {{"lr0", c.optim.lr0},
        {"momentum", c.optim.momentum},
        {"weight_decay", c.optim.weight_decay},
        {"lr_decay_gamma", c.optim.lr_decay_gamma},
        {"batch_size", c.optim.batch_size},
        {"max_epochs", c.optim.max_epochs},
        {"patience", c.optim.patience}}},
      {"monitor", to_string(c.monitor)},
      {"data",
       {{"manifest", c.data.manifest},
        {"frames_per_video", c.data.frames_per_video},
        {"balance", c.data.balance},
        {"augment", c.data.augment},
        {"norm_mean", n.mean},
        {"norm_std", n.std},
        {"datasets", c.data.datasets},
        {"pais", c.data.pais}}},
      {"eval", {{"video_score_rule", network::to_string(c.video_score_rule)}, {"batch_size", c.eval_batch_size}}},
  };
}

TrainConfig config_from_json(const json& user) {
  json j = to_json(TrainConfig{});
  check_keys(user, j, "");
  j.merge_patch(user);

  TrainConfig c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    c.preset = j.at("preset").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.monitor = parse_monitor(j.at("monitor").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  auto& m = c.model;
  m.input_size = get<int>(j, "model", "input_size");
  m.backbone = network::BackboneSpec::named(get<std::string>(j, "model", "backbone"), m.input_size);
  if (auto p = get<std::string>(j, "model", "pretrained_weights"); !p.empty()) m.backbone.pretrained_weights_path = p;
  m.in_channels = get<int>(j, "model", "in_channels");
  m.use_mfd = get<bool>(j, "model", "use_mfd");
  m.use_ham = get<bool>(j, "model", "use_ham");
  m.band_geometry = freq::parse_band_geometry(get<std::string>(j, "model", "band_geometry"));
  m.reduction_ratio = get<int>(j, "model", "reduction_ratio");
  m.pixel_map_size = get<int>(j, "model", "pixel_map_size");
  m.seed = c.seed;

  c.loss_kind = losses::parse_loss_kind(get<std::string>(j, "loss", "kind"));
  c.loss_weights.gamma = get<double>(j, "loss", "gamma");
  c.loss_weights.lambda1_schedule = {get<double>(j, "loss", "lambda1_initial"), get<int>(j, "loss", "lambda1_after_epoch"),
                                     get<double>(j, "loss", "lambda1_value")};
  c.loss_weights.lambda2 = get<double>(j, "loss", "lambda2");

  c.optim = {get<double>(j, "optim", "lr0"),         get<double>(j, "optim", "momentum"),
             get<double>(j, "optim", "weight_decay"), get<double>(j, "optim", "lr_decay_gamma"),
             get<int>(j, "optim", "batch_size"),      get<int>(j, "optim", "max_epochs"),
             get<int>(j, "optim", "patience")};

  c.data.manifest = get<std::string>(j, "data", "manifest");
  c.data.frames_per_video = get<int>(j, "data", "frames_per_video");
  c.data.balance = get<bool>(j, "data", "balance");
  c.data.augment = get<bool>(j, "data", "augment");
  c.data.normalization.mean = get<std::array<float, 3>>(j, "data", "norm_mean");
  c.data.normalization.std = get<std::array<float, 3>>(j, "data", "norm_std");
  c.data.datasets = get<std::vector<std::string>>(j, "data", "datasets");
  c.data.pais = get<std::vector<std::string>>(j, "data", "pais");

  c.video_score_rule = network::parse_video_score_rule(get<std::string>(j, "eval", "video_score_rule"));
  c.eval_batch_size = get<int>(j, "eval", "batch_size");
  c.validate();
  return c;
}

static json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "config: cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
}

TrainConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "override '" + assignment + "' must look like key.path=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(!part.empty(), "override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

TrainConfig resolve_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j = path.empty() ? json::object() : read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

void apply_preset(TrainConfig& cfg, const std::string& preset) {
  if (preset == "rgb_bce") {
    cfg.model.use_mfd = false;
    cfg.model.use_ham = false;
    cfg.loss_kind = losses::LossKind::Bce;
  } else if (preset == "rgb_mfd_bce") {
    cfg.model.use_mfd = true;
    cfg.model.use_ham = false;
    cfg.loss_kind = losses::LossKind::Bce;
  } else if (preset == "full_bce") {
    cfg.model.use_mfd = true;
    cfg.model.use_ham = true;
    cfg.loss_kind = losses::LossKind::Bce;
  } else if (preset == "full_flsl") {
    cfg.model.use_mfd = true;
    cfg.model.use_ham = true;
    cfg.loss_kind = losses::LossKind::FocalSmoothL1;
  } else {
    throw ValidationError("unknown preset '" + preset + "'");
  }
  cfg.preset = preset;
}

double lr_at(int epoch, const OptimConfig& optim) {
  require(epoch >= 0, "lr_at: epoch must be non-negative");
  return optim.lr0 * std::pow(optim.lr_decay_gamma, epoch);
}

}  // namespace freqpad::train
