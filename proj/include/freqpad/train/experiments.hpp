#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqpad/eval/metrics.hpp"
#include "freqpad/train/trainer.hpp"

namespace freqpad::train {


struct AblationRow {
  std::string preset;
  std::uint64_t seed = 0;
  int epochs_run = 0;
  eval::MetricReport test;  // threshold from the dev-split EER
};

struct AblationResult {
  std::vector<AblationRow> rows;
  double median_auc(const std::string& preset) const;
  double median_hter(const std::string& preset) const;
};

// Trains and tests every preset for every seed on the same manifest. Runs go
// to <base.output_dir>/<preset>/seed_<s>.
AblationResult run_ablation(const TrainConfig& base, const data::SampleManifest& manifest,
                            const std::vector<std::string>& presets, const std::vector<std::uint64_t>& seeds,
                            const ProgressFn& progress = {});

nlohmann::json to_json(const AblationResult& result);
// One row per preset: median HTER and AUC over seeds, in percent.
std::string render_ablation_table(const AblationResult& result);


enum class ProtocolKind { Intra, Cross };
ProtocolKind parse_protocol_kind(const std::string& text);
std::string to_string(ProtocolKind kind);

// Train on the train/dev splits of `train_datasets`; test on the test split
// of `test_datasets`. Empty PAI lists keep every PAI. With a checkpoint the
// training step is skipped.
struct FoldSpec {
  std::string name;
  std::vector<std::string> train_datasets;
  std::vector<std::string> test_datasets;
  std::vector<std::string> train_pais;
  std::vector<std::string> test_pais;
  std::optional<std::string> checkpoint;
};

struct ProtocolConfig {
  int schema_version = 1;
  std::string name;
  ProtocolKind kind = ProtocolKind::Cross;
  std::vector<FoldSpec> folds;
};

ProtocolConfig protocol_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProtocolConfig& p);
ProtocolConfig load_protocol(const std::filesystem::path& path);

// Throws ValidationError when a split is empty, a class is missing, a
// cross-dataset fold reuses a training dataset for testing, or any
// (dataset, video) pair appears on both sides.
void validate_fold(const ProtocolConfig& protocol, const FoldSpec& fold, const data::SampleManifest& train_side,
                   const data::SampleManifest& test_side);

struct ProtocolResult {
  std::vector<eval::MetricReport> folds;
  std::map<std::string, eval::FoldStat> aggregate;  // metric -> mean/std over folds
};

// Intra: threshold from the training datasets' dev-split EER; reports
// APCER_wc/BPCER/ACER. Cross: threshold from the test set's EER; reports HTER
// and AUC. Writes per-fold runs plus protocol_report.json and
// protocol_table.txt under base.output_dir.
ProtocolResult run_protocol(const ProtocolConfig& protocol, const TrainConfig& base,
                            const data::SampleManifest& manifest, const ProgressFn& progress = {});

nlohmann::json to_json(const ProtocolResult& result, ProtocolKind kind);

}  // namespace freqpad::train
