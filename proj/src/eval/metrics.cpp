#include "freqpad/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "freqpad/error.hpp"

namespace freqpad::eval {

namespace {

bool is_attack(const ScoreRecord& r) { return r.label == data::Label::Attack; }

void check_score(const ScoreRecord& r) {
  require(std::isfinite(r.score), "metrics: non-finite score for video '" + r.video_id + "'");
}

}  // namespace

double apcer(std::span<const ScoreRecord> attacks, double threshold) {
  require(!attacks.empty(), "apcer: no attack records");
  const std::string& pai = attacks.front().pai;
  std::size_t accepted = 0;
  for (const auto& r : attacks) {
    require(is_attack(r), "apcer: bona fide record '" + r.video_id + "' in attack set");
    require(r.pai == pai, "apcer: records span several PAIs");
    check_score(r);
    if (predicted_bona_fide(r.score, threshold)) ++accepted;
  }
  return static_cast<double>(accepted) / static_cast<double>(attacks.size());
}

std::map<std::string, double> apcer_per_pai(std::span<const ScoreRecord> records, double threshold) {
  std::map<std::string, std::vector<ScoreRecord>> groups;
  for (const auto& r : records)
    if (is_attack(r)) groups[r.pai].push_back(r);
  std::map<std::string, double> out;
  for (const auto& [pai, group] : groups) out[pai] = apcer(group, threshold);
  return out;
}

double apcer_wc(std::span<const ScoreRecord> records, double threshold) {
  const auto per_pai = apcer_per_pai(records, threshold);
  require(!per_pai.empty(), "apcer_wc: no attack records");
  double worst = 0.0;
  for (const auto& [pai, rate] : per_pai) worst = std::max(worst, rate);
  return worst;
}

double apcer_pooled(std::span<const ScoreRecord> records, double threshold) {
  std::size_t n = 0, accepted = 0;
  for (const auto& r : records) {
    if (!is_attack(r)) continue;
    check_score(r);
    ++n;
    if (predicted_bona_fide(r.score, threshold)) ++accepted;
  }
  require(n > 0, "apcer_pooled: no attack records");
  return static_cast<double>(accepted) / static_cast<double>(n);
}

double bpcer(std::span<const ScoreRecord> records, double threshold) {
  std::size_t n = 0, rejected = 0;
  for (const auto& r : records) {
    if (is_attack(r)) continue;
    check_score(r);
    ++n;
    if (!predicted_bona_fide(r.score, threshold)) ++rejected;
  }
  require(n > 0, "bpcer: no bona fide records");
  return static_cast<double>(rejected) / static_cast<double>(n);
}

double acer(double apcer_wc, double bpcer) { return (apcer_wc + bpcer) / 2.0; }
double hter(double apcer, double bpcer) { return (apcer + bpcer) / 2.0; }

double auc(std::span<const ScoreRecord> records) {
  std::vector<std::pair<double, bool>> s;  // (score, bona fide)
  s.reserve(records.size());
  std::uint64_t n_bona = 0, n_attack = 0;
  for (const auto& r : records) {
    check_score(r);
    const bool bona = !is_attack(r);
    s.emplace_back(r.score, bona);
    (bona ? n_bona : n_attack) += 1;
  }
  require(n_bona > 0 && n_attack > 0, "auc: both classes are required");
  std::sort(s.begin(), s.end());
  // u counts half-units: 2 per (bona > attack) pair, 1 per tie.
  std::uint64_t u = 0, attacks_below = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    std::uint64_t bona = 0, attack = 0;
    for (; j < s.size() && s[j].first == s[i].first; ++j) (s[j].second ? bona : attack) += 1;
    u += bona * (2 * attacks_below + attack);
    attacks_below += attack;
    i = j;
  }
  return static_cast<double>(u) / (2.0 * static_cast<double>(n_bona) * static_cast<double>(n_attack));
}

double eer_threshold(std::span<const ScoreRecord> records) {
  std::vector<double> scores;
  bool has_bona = false, has_attack = false;
  for (const auto& r : records) {
    check_score(r);
    scores.push_back(r.score);
    (is_attack(r) ? has_attack : has_bona) = true;
  }
  require(has_bona && has_attack, "eer_threshold: both classes are required");
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> candidates{scores.front()};
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    const double lo = scores[i], hi = scores[i + 1];
    const double mid = lo + (hi - lo) / 2.0;
    candidates.push_back(mid > lo ? mid : hi);
  }
  candidates.push_back(std::nextafter(scores.back(), std::numeric_limits<double>::infinity()));

  double best_t = candidates.front(), best_gap = 2.0, best_bpcer = 2.0;
  for (double t : candidates) {
    const double a = apcer_pooled(records, t), b = bpcer(records, t);
    const double gap = std::abs(a - b);
    if (gap < best_gap || (gap == best_gap && b < best_bpcer)) {
      best_t = t;
      best_gap = gap;
      best_bpcer = b;
    }
  }
  return best_t;
}

MetricReport compute_report(std::span<const ScoreRecord> records, double threshold, std::string name) {
  MetricReport rep;
  rep.name = std::move(name);
  rep.threshold = threshold;
  for (const auto& r : records) {
    if (is_attack(r)) {
      ++rep.n_attack;
      ++rep.attack_count_per_pai[r.pai];
    } else {
      ++rep.n_bona_fide;
    }
  }
  require(rep.n_attack > 0 && rep.n_bona_fide > 0, "compute_report: both classes are required");
  rep.apcer_per_pai = apcer_per_pai(records, threshold);
  rep.apcer_wc = apcer_wc(records, threshold);
  rep.apcer = apcer_pooled(records, threshold);
  rep.bpcer = bpcer(records, threshold);
  rep.acer = acer(rep.apcer_wc, rep.bpcer);
  rep.hter = hter(rep.apcer, rep.bpcer);
  rep.auc = auc(records);
  return rep;
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"name", r.name},
          {"apcer_per_pai", r.apcer_per_pai},
          {"attack_count_per_pai", r.attack_count_per_pai},
          {"apcer_wc", r.apcer_wc},
          {"apcer", r.apcer},
          {"bpcer", r.bpcer},
          {"acer", r.acer},
          {"hter", r.hter},
          {"auc", r.auc},
          {"threshold", r.threshold},
          {"n_bona_fide", r.n_bona_fide},
          {"n_attack", r.n_attack}};
}

MetricReport report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.name = j.value("name", "");
    r.apcer_per_pai = j.at("apcer_per_pai").get<std::map<std::string, double>>();
    r.attack_count_per_pai = j.at("attack_count_per_pai").get<std::map<std::string, int>>();
    r.apcer_wc = j.at("apcer_wc").get<double>();
    r.apcer = j.at("apcer").get<double>();
    r.bpcer = j.at("bpcer").get<double>();
    r.acer = j.at("acer").get<double>();
    r.hter = j.at("hter").get<double>();
    r.auc = j.at("auc").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.n_bona_fide = j.at("n_bona_fide").get<int>();
    r.n_attack = j.at("n_attack").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("metric report: ") + e.what());
  }
}

FoldStat fold_stat(std::span<const double> values) {
  require(!values.empty(), "fold_stat: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

std::string format_percent(double rate) {
  const double pct = std::round(rate * 100.0 * 1e6) / 1e6;
  const double tenths = std::round(pct * 10.0);  // std::round rounds halves away from zero
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0 + 0.0);
  return buf;
}

std::string render_table(std::span<const MetricReport> reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %9s %9s %9s %9s %9s\n", "fold", "APCER_wc", "BPCER", "ACER", "HTER", "AUC");
  os << line;
  const auto row = [&](const std::string& name, const std::string& a, const std::string& b, const std::string& c,
                       const std::string& d, const std::string& e) {
    std::snprintf(line, sizeof line, "%-24s %9s %9s %9s %9s %9s\n", name.c_str(), a.c_str(), b.c_str(), c.c_str(),
                  d.c_str(), e.c_str());
    os << line;
  };
  for (const auto& r : reports)
    row(r.name, format_percent(r.apcer_wc), format_percent(r.bpcer), format_percent(r.acer), format_percent(r.hter),
        format_percent(r.auc));
  if (reports.size() > 1) {
    std::vector<double> cols[5];
    for (const auto& r : reports) {
      cols[0].push_back(r.apcer_wc);
      cols[1].push_back(r.bpcer);
      cols[2].push_back(r.acer);
      cols[3].push_back(r.hter);
      cols[4].push_back(r.auc);
    }
    std::string cell[5];
    for (int i = 0; i < 5; ++i) {
      const FoldStat s = fold_stat(cols[i]);
      cell[i] = format_percent(s.mean) + "+-" + format_percent(s.std);
    }
    row("mean+-std (population)", cell[0], cell[1], cell[2], cell[3], cell[4]);
  }
  os << "rates in percent; score >= threshold => bona fide\n";
  return os.str();
}

void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "write_scores: cannot open " + path.string());
  out << "video_id,score,label,pai,dataset_id\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out << r.video_id << ',' << buf << ',' << data::to_string(r.label) << ',' << r.pai << ',' << r.dataset_id << '\n';
  }
  require(static_cast<bool>(out), "write_scores: write failed for " + path.string());
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "read_scores: cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "video_id,score,label,pai,dataset_id",
          "read_scores: bad header in " + path.string());
  std::vector<ScoreRecord> out;
  for (int row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    require(f.size() == 5, "read_scores: row " + std::to_string(row) + " needs 5 fields");
    ScoreRecord r;
    r.video_id = f[0];
    try {
      std::size_t used = 0;
      r.score = std::stod(f[1], &used);
      require(used == f[1].size(), "trailing characters");
    } catch (const std::exception&) {
      throw ValidationError("read_scores: row " + std::to_string(row) + " has a bad score '" + f[1] + "'");
    }
    r.label = data::parse_label(f[2]);
    r.pai = f[3];
    r.dataset_id = f[4];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace freqpad::eval
