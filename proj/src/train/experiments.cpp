#include "freqpad/train/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "freqpad/error.hpp"
#include "freqpad/train/checkpoint.hpp"

namespace freqpad::train {

using nlohmann::json;

namespace {

double median(std::vector<double> v) {
  require(!v.empty(), "median: no values");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << text;
}

bool has_both_classes(const data::SampleManifest& m) {
  bool bona = false, attack = false;
  for (const auto& r : m.records) (r.label == data::Label::BonaFide ? bona : attack) = true;
  return bona && attack;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "&") + s;
  return out;
}

}  // namespace

double AblationResult::median_auc(const std::string& preset) const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.preset == preset) v.push_back(r.test.auc);
  return median(v);
}

double AblationResult::median_hter(const std::string& preset) const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.preset == preset) v.push_back(r.test.hter);
  return median(v);
}

AblationResult run_ablation(const TrainConfig& base, const data::SampleManifest& manifest,
                            const std::vector<std::string>& presets, const std::vector<std::uint64_t>& seeds,
                            const ProgressFn& progress) {
  require(!presets.empty() && !seeds.empty(), "ablation: need at least one preset and one seed");
  AblationResult result;
  for (const auto& preset : presets) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      apply_preset(cfg, preset);
      cfg.seed = seed;
      cfg.model.seed = seed;
      cfg.output_dir = (std::filesystem::path(base.output_dir) / preset / ("seed_" + std::to_string(seed))).string();
      const TrainResult run = train(cfg, manifest, progress);

      auto ckpt = load_checkpoint(run.checkpoint);
      std::vector<data::LoadIssue> issues;
      const auto dev = select_split(manifest, cfg, data::Split::Dev);
      const auto test = select_split(manifest, cfg, data::Split::Test);
      auto ev = evaluate_split(*ckpt.model, ckpt.meta.config, test, &dev, issues, preset);
      eval::write_scores(std::filesystem::path(cfg.output_dir) / "test_scores.csv", ev.eval.videos);
      result.rows.push_back({preset, seed, static_cast<int>(run.log.size()), ev.report});
    }
  }
  write_text(std::filesystem::path(base.output_dir) / "ablation.json", to_json(result).dump(2) + "\n");
  write_text(std::filesystem::path(base.output_dir) / "ablation_table.txt", render_ablation_table(result));
  return result;
}

json to_json(const AblationResult& result) {
  json rows = json::array();
  std::vector<std::string> order;
  for (const auto& r : result.rows) {
    rows.push_back({{"preset", r.preset}, {"seed", r.seed}, {"epochs_run", r.epochs_run}, {"test", eval::to_json(r.test)}});
    if (std::find(order.begin(), order.end(), r.preset) == order.end()) order.push_back(r.preset);
  }
  json medians = json::object();
  for (const auto& p : order) medians[p] = {{"hter", result.median_hter(p)}, {"auc", result.median_auc(p)}};
  return {{"runs", rows}, {"median_over_seeds", medians}};
}

std::string render_ablation_table(const AblationResult& result) {
  std::vector<std::string> order;
  for (const auto& r : result.rows)
    if (std::find(order.begin(), order.end(), r.preset) == order.end()) order.push_back(r.preset);
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %5s %9s %9s\n", "preset", "seeds", "HTER", "AUC");
  out += line;
  for (const auto& p : order) {
    const auto n = std::count_if(result.rows.begin(), result.rows.end(), [&](const auto& r) { return r.preset == p; });
    std::snprintf(line, sizeof line, "%-14s %5ld %9s %9s\n", p.c_str(), static_cast<long>(n),
                  eval::format_percent(result.median_hter(p)).c_str(), eval::format_percent(result.median_auc(p)).c_str());
    out += line;
  }
  out += "median over seeds, percent; HTER at the dev-split EER threshold\n";
  return out;
}

ProtocolKind parse_protocol_kind(const std::string& text) {
  if (text == "intra") return ProtocolKind::Intra;
  if (text == "cross") return ProtocolKind::Cross;
  throw ValidationError("unknown protocol kind '" + text + "' (expected intra or cross)");
}

std::string to_string(ProtocolKind kind) { return kind == ProtocolKind::Intra ? "intra" : "cross"; }

ProtocolConfig protocol_from_json(const json& j) {
  static const std::set<std::string> top{"schema_version", "name", "kind", "folds"};
  static const std::set<std::string> fold_keys{"name", "train_datasets", "test_datasets", "train_pais", "test_pais",
                                               "checkpoint"};
  require(j.is_object(), "protocol: top level must be an object");
  for (const auto& [k, v] : j.items()) require(top.count(k) > 0, "protocol: unknown key '" + k + "'");
  ProtocolConfig p;
  try {
    p.schema_version = j.value("schema_version", 1);
    require(p.schema_version == 1, "protocol: unsupported schema_version");
    p.name = j.value("name", "protocol");
    p.kind = parse_protocol_kind(j.value("kind", "cross"));
    require(j.contains("folds") && j.at("folds").is_array() && !j.at("folds").empty(), "protocol: 'folds' must be a non-empty array");
    for (const auto& f : j.at("folds")) {
      for (const auto& [k, v] : f.items()) require(fold_keys.count(k) > 0, "protocol: unknown fold key '" + k + "'");
      FoldSpec fold;
      fold.train_datasets = f.at("train_datasets").get<std::vector<std::string>>();
      fold.test_datasets = f.at("test_datasets").get<std::vector<std::string>>();
      fold.train_pais = f.value("train_pais", std::vector<std::string>{});
      fold.test_pais = f.value("test_pais", std::vector<std::string>{});
      fold.name = f.value("name", join(fold.train_datasets) + "->" + join(fold.test_datasets));
      if (f.contains("checkpoint")) fold.checkpoint = f.at("checkpoint").get<std::string>();
      require(!fold.train_datasets.empty() && !fold.test_datasets.empty(),
              "protocol: fold '" + fold.name + "' needs train and test datasets");
      p.folds.push_back(std::move(fold));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("protocol: ") + e.what());
  }
  return p;
}

json to_json(const ProtocolConfig& p) {
  json folds = json::array();
  for (const auto& f : p.folds) {
    json jf = {{"name", f.name},
               {"train_datasets", f.train_datasets},
               {"test_datasets", f.test_datasets},
               {"train_pais", f.train_pais},
               {"test_pais", f.test_pais}};
    if (f.checkpoint) jf["checkpoint"] = *f.checkpoint;
    folds.push_back(jf);
  }
  return {{"schema_version", p.schema_version}, {"name", p.name}, {"kind", to_string(p.kind)}, {"folds", folds}};
}

ProtocolConfig load_protocol(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "protocol: cannot open " + path.string());
  try {
    return protocol_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError("protocol: " + path.string() + ": " + e.what());
  }
}

void validate_fold(const ProtocolConfig& protocol, const FoldSpec& fold, const data::SampleManifest& train_side,
                   const data::SampleManifest& test_side) {
  const std::string where = "fold '" + fold.name + "': ";
  for (auto split : {data::Split::Train, data::Split::Dev}) {
    require(has_both_classes(data::filter_manifest(train_side, {split})),
            where + "the " + data::to_string(split) + " split needs bona fide and attack records");
  }
  require(has_both_classes(test_side), where + "the test split needs bona fide and attack records");
  if (protocol.kind == ProtocolKind::Cross) {
    for (const auto& d : fold.test_datasets) {
      require(std::find(fold.train_datasets.begin(), fold.train_datasets.end(), d) == fold.train_datasets.end(),
              where + "dataset '" + d + "' is used for both training and testing");
    }
  }
  std::set<std::pair<std::string, std::string>> train_videos;
  for (const auto& r : train_side.records) train_videos.insert({r.dataset_id, r.video_id});
  for (const auto& r : test_side.records) {
    require(train_videos.count({r.dataset_id, r.video_id}) == 0,
            where + "video '" + r.dataset_id + "/" + r.video_id + "' appears in training and test data");
  }
}

ProtocolResult run_protocol(const ProtocolConfig& protocol, const TrainConfig& base, const data::SampleManifest& manifest,
                            const ProgressFn& progress) {
  const std::filesystem::path root = base.output_dir;
  std::filesystem::create_directories(root);
  write_text(root / "protocol.json", to_json(protocol).dump(2) + "\n");

  ProtocolResult result;
  for (const auto& fold : protocol.folds) {
    TrainConfig cfg = base;
    cfg.data.datasets = fold.train_datasets;
    cfg.data.pais = fold.train_pais;
    cfg.output_dir = (root / fold.name).string();

    const auto train_side = data::filter_manifest(manifest, {data::Split::Train, data::Split::Dev}, fold.train_datasets,
                                                  fold.train_pais);
    const auto test_side = data::sample_video_frames(
        data::filter_manifest(manifest, {data::Split::Test}, fold.test_datasets, fold.test_pais), cfg.data.frames_per_video);
    validate_fold(protocol, fold, train_side, test_side);

    std::filesystem::path checkpoint;
    if (fold.checkpoint) {
      checkpoint = *fold.checkpoint;
    } else {
      checkpoint = train(cfg, manifest, progress).checkpoint;
    }
    auto ckpt = load_checkpoint(checkpoint);
    std::vector<data::LoadIssue> issues;
    SplitEvaluation ev;
    if (protocol.kind == ProtocolKind::Intra) {
      const auto dev = select_split(manifest, cfg, data::Split::Dev);
      ev = evaluate_split(*ckpt.model, ckpt.meta.config, test_side, &dev, issues, fold.name);
    } else {
      ev = evaluate_split(*ckpt.model, ckpt.meta.config, test_side, nullptr, issues, fold.name);
    }
    std::filesystem::create_directories(cfg.output_dir);
    eval::write_scores(std::filesystem::path(cfg.output_dir) / "test_scores.csv", ev.eval.videos);
    write_text(std::filesystem::path(cfg.output_dir) / "report.json", eval::to_json(ev.report).dump(2) + "\n");
    result.folds.push_back(ev.report);
  }

  const auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : result.folds) v.push_back(r.*field);
    return eval::fold_stat(v);
  };
  result.aggregate["apcer_wc"] = collect(&eval::MetricReport::apcer_wc);
  result.aggregate["apcer"] = collect(&eval::MetricReport::apcer);
  result.aggregate["bpcer"] = collect(&eval::MetricReport::bpcer);
  result.aggregate["acer"] = collect(&eval::MetricReport::acer);
  result.aggregate["hter"] = collect(&eval::MetricReport::hter);
  result.aggregate["auc"] = collect(&eval::MetricReport::auc);

  write_text(root / "protocol_report.json", to_json(result, protocol.kind).dump(2) + "\n");
  write_text(root / "protocol_table.txt", eval::render_table(result.folds));
  return result;
}

json to_json(const ProtocolResult& result, ProtocolKind kind) {
  json folds = json::array();
  for (const auto& r : result.folds) folds.push_back(eval::to_json(r));
  json agg = json::object();
  for (const auto& [k, s] : result.aggregate) agg[k] = {{"mean", s.mean}, {"std", s.std}};
  return {{"kind", to_string(kind)},
          {"threshold_source", kind == ProtocolKind::Intra ? "dev-split EER" : "test-set EER"},
          {"std_convention", "population (divide by n)"},
          {"folds", folds},
          {"aggregate", agg}};
}

}  // namespace freqpad::train
