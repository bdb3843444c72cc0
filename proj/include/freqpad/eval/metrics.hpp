#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqpad/data/manifest.hpp"

namespace freqpad::eval {

// One mean-fused score per video; higher = more bona fide.
struct ScoreRecord {
  std::string video_id;
  double score = 0.0;
  data::Label label = data::Label::BonaFide;
  std::string pai = "none";
  std::string dataset_id;
};

// Decision rule used everywhere: score >= threshold => bona fide.
inline bool predicted_bona_fide(double score, double threshold) { return score >= threshold; }

// Fraction of the given attack records predicted bona fide. All records must
// be attacks of one PAI.
double apcer(std::span<const ScoreRecord> attacks_of_one_pai, double threshold);
std::map<std::string, double> apcer_per_pai(std::span<const ScoreRecord> records, double threshold);
double apcer_wc(std::span<const ScoreRecord> records, double threshold);
// All attack records as one population.
double apcer_pooled(std::span<const ScoreRecord> records, double threshold);
double bpcer(std::span<const ScoreRecord> records, double threshold);
double acer(double apcer_wc, double bpcer);
double hter(double apcer, double bpcer);

// Mann-Whitney area: P(bona fide score > attack score) + 0.5 P(tie).
double auc(std::span<const ScoreRecord> records);

// Minimizes |APCER_pooled - BPCER| over candidate thresholds: midpoints of
// adjacent distinct scores, the lowest score (everything accepted) and the
// successor of the highest score (everything rejected). Ties go to lower
// BPCER, then the lower threshold.
double eer_threshold(std::span<const ScoreRecord> records);

struct MetricReport {
  std::string name;
  std::map<std::string, double> apcer_per_pai;
  std::map<std::string, int> attack_count_per_pai;
  double apcer_wc = 0.0;
  double apcer = 0.0;  // pooled
  double bpcer = 0.0;
  double acer = 0.0;
  double hter = 0.0;
  double auc = 0.0;
  double threshold = 0.0;
  int n_bona_fide = 0;
  int n_attack = 0;
};

// All metrics at a fixed threshold. Both classes must be present.
MetricReport compute_report(std::span<const ScoreRecord> records, double threshold, std::string name = {});

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

struct FoldStat {
  double mean = 0.0;
  double std = 0.0;  // population convention (divide by n)
};
FoldStat fold_stat(std::span<const double> values);

// Rate in [0, 1] as a percentage with one decimal, halves rounded away from
// zero after snapping to 1e-6 so 0.0195 renders as "2.0".
std::string format_percent(double rate);

// Rows of APCER_wc/BPCER/ACER/HTER/AUC in percent, plus a mean +- std row
// when there is more than one report.
std::string render_table(std::span<const MetricReport> reports);

// Score CSV: video_id,score,label,pai,dataset_id
void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);

}  // namespace freqpad::eval
