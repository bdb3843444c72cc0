#include "freqpad/data/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "freqpad/error.hpp"

namespace freqpad::data {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

int parse_int(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("manifest: bad integer '" + text + "' in " + what);
  }
}

void check_field(const std::string& value, const char* name) {
  require(value.find_first_of(",\n\r") == std::string::npos,
          std::string("manifest: field ") + name + " contains a separator: '" + value + "'");
}

}  // namespace

std::string to_string(Label label) { return label == Label::BonaFide ? "bona_fide" : "attack"; }

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

Label parse_label(const std::string& text) {
  if (text == "bona_fide") return Label::BonaFide;
  if (text == "attack") return Label::Attack;
  throw ValidationError("unknown label '" + text + "'");
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "dev") return Split::Dev;
  if (text == "test") return Split::Test;
  throw ValidationError("unknown split '" + text + "'");
}

SampleManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open manifest " + path.string());
  SampleManifest manifest;
  manifest.base_dir = path.parent_path();
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "manifest is empty: " + path.string());
  const std::string prefix = "# freqpad-manifest v";
  require(line.rfind(prefix, 0) == 0, "manifest: missing version line in " + path.string());
  manifest.schema_version = parse_int(line.substr(prefix.size()), "version line");
  require(manifest.schema_version == kManifestSchemaVersion,
          "manifest: unsupported schema version " + std::to_string(manifest.schema_version));
  require(static_cast<bool>(std::getline(in, line)) && line == kManifestColumns,
          "manifest: header must be '" + std::string(kManifestColumns) + "'");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = "row " + std::to_string(row);
    require(f.size() == 10, "manifest: " + where + " has " + std::to_string(f.size()) + " fields");
    SampleRecord r;
    r.dataset_id = f[0];
    r.video_id = f[1];
    r.frame_path = f[2];
    r.label = parse_label(f[3]);
    r.pai = f[4];
    r.split = parse_split(f[5]);
    const bool any_crop = !(f[6].empty() && f[7].empty() && f[8].empty() && f[9].empty());
    if (any_crop) {
      r.crop_box = CropBox{parse_int(f[6], where), parse_int(f[7], where), parse_int(f[8], where),
                           parse_int(f[9], where)};
    }
    manifest.records.push_back(std::move(r));
    ++row;
  }
  return manifest;
}

std::string format_manifest(const SampleManifest& manifest) {
  std::ostringstream out;
  out << "# freqpad-manifest v" << manifest.schema_version << "\n" << kManifestColumns << "\n";
  for (const auto& r : manifest.records) {
    check_field(r.dataset_id, "dataset_id");
    check_field(r.video_id, "video_id");
    check_field(r.frame_path, "frame_path");
    check_field(r.pai, "pai");
    out << r.dataset_id << ',' << r.video_id << ',' << r.frame_path << ',' << to_string(r.label) << ',' << r.pai
        << ',' << to_string(r.split) << ',';
    if (r.crop_box) {
      out << r.crop_box->x << ',' << r.crop_box->y << ',' << r.crop_box->w << ',' << r.crop_box->h;
    } else {
      out << ",,,";
    }
    out << "\n";
  }
  return out.str();
}

void write_manifest(const std::filesystem::path& path, const SampleManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write manifest " + path.string());
  out << format_manifest(manifest);
  require(out.good(), "failed writing manifest " + path.string());
}

std::filesystem::path resolve_frame(const SampleManifest& manifest, const SampleRecord& record) {
  const std::filesystem::path p(record.frame_path);
  return p.is_absolute() ? p : manifest.base_dir / p;
}

std::vector<ManifestIssue> validate_manifest(const SampleManifest& manifest, bool check_images) {
  std::vector<ManifestIssue> issues;
  struct VideoKey {
    Label label;
    std::string pai;
    Split split;
    std::size_t first_row;
  };
  std::map<std::pair<std::string, std::string>, VideoKey> videos;  // (dataset, video)
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (r.video_id.empty()) issues.push_back({i, "empty video_id"});
    if (r.frame_path.empty()) issues.push_back({i, "empty frame_path"});
    if ((r.label == Label::BonaFide) != (r.pai == "none"))
      issues.push_back({i, "bona fide records must have pai 'none' and attacks a named pai"});
    if (r.crop_box && (r.crop_box->w <= 0 || r.crop_box->h <= 0 || r.crop_box->x < 0 || r.crop_box->y < 0))
      issues.push_back({i, "crop box must have non-negative origin and positive size"});
    auto [it, inserted] = videos.try_emplace(std::pair{r.dataset_id, r.video_id}, VideoKey{r.label, r.pai, r.split, i});
    if (!inserted) {
      const auto& v = it->second;
      if (v.label != r.label || v.pai != r.pai || v.split != r.split)
        issues.push_back({i, "video " + r.video_id + " disagrees with row " + std::to_string(v.first_row) +
                                 " on label/pai/split"});
    }
    if (check_images) {
      const auto path = resolve_frame(manifest, r);
      const cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
      if (img.empty()) {
        issues.push_back({i, "unreadable image " + path.string()});
      } else if (r.crop_box && (r.crop_box->x + r.crop_box->w > img.cols || r.crop_box->y + r.crop_box->h > img.rows)) {
        issues.push_back({i, "crop box outside the " + std::to_string(img.cols) + "x" + std::to_string(img.rows) +
                                 " image"});
      }
    }
  }
  return issues;
}

SampleManifest filter_manifest(const SampleManifest& manifest, const std::vector<Split>& splits,
                               const std::vector<std::string>& dataset_ids, const std::vector<std::string>& pais) {
  SampleManifest out;
  out.schema_version = manifest.schema_version;
  out.base_dir = manifest.base_dir;
  auto any_of = [](const auto& list, const auto& v) {
    return list.empty() || std::find(list.begin(), list.end(), v) != list.end();
  };
  for (const auto& r : manifest.records) {
    if (any_of(splits, r.split) && any_of(dataset_ids, r.dataset_id) && (r.pai == "none" || any_of(pais, r.pai)))
      out.records.push_back(r);
  }
  return out;
}

SampleManifest merge_manifests(const std::vector<SampleManifest>& parts, const std::filesystem::path& base_dir) {
  SampleManifest out;
  out.base_dir = base_dir;
  const auto base = std::filesystem::absolute(base_dir.empty() ? std::filesystem::path(".") : base_dir).lexically_normal();
  for (const auto& m : parts) {
    for (auto r : m.records) {
      if (std::filesystem::path(r.frame_path).is_absolute()) {
        out.records.push_back(std::move(r));
        continue;
      }
      const auto full = std::filesystem::absolute(resolve_frame(m, r)).lexically_normal();
      r.frame_path = full.lexically_relative(base).generic_string();
      if (r.frame_path.empty()) r.frame_path = full.generic_string();
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace freqpad::data
