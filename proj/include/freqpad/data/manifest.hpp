#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace freqpad::data {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kManifestColumns =
    "dataset_id,video_id,frame_path,label,pai,split,crop_x,crop_y,crop_w,crop_h";

enum class Label { Attack = 0, BonaFide = 1 };
enum class Split { Train, Dev, Test };

std::string to_string(Label label);
std::string to_string(Split split);
Label parse_label(const std::string& text);
Split parse_split(const std::string& text);
inline int label_value(Label label) { return static_cast<int>(label); }

struct CropBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool operator==(const CropBox&) const = default;
};

struct SampleRecord {
  std::string dataset_id;
  std::string video_id;
  std::string frame_path;  // relative paths resolve against the manifest directory
  Label label = Label::BonaFide;
  std::string pai = "none";
  Split split = Split::Train;
  std::optional<CropBox> crop_box;

  bool operator==(const SampleRecord&) const = default;
};

struct SampleManifest {
  int schema_version = kManifestSchemaVersion;
  std::filesystem::path base_dir;
  std::vector<SampleRecord> records;
};

// CSV with a "# freqpad-manifest v<N>" line followed by the fixed column header.
SampleManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const SampleManifest& manifest);
void write_manifest(const std::filesystem::path& path, const SampleManifest& manifest);

std::filesystem::path resolve_frame(const SampleManifest& manifest, const SampleRecord& record);

struct ManifestIssue {
  std::size_t row = 0;  // 0-based record index
  std::string message;
};

// Record-level invariants (bona fide <=> pai "none", crop geometry) and
// per-video consistency. With `check_images`, frames must be readable and
// crop boxes must lie inside them.
std::vector<ManifestIssue> validate_manifest(const SampleManifest& manifest, bool check_images = false);

// Records whose split, dataset and PAI pass the given filters (empty = any).
SampleManifest filter_manifest(const SampleManifest& manifest, const std::vector<Split>& splits,
                               const std::vector<std::string>& dataset_ids = {},
                               const std::vector<std::string>& pais = {});

// Concatenates manifests under a new base directory; relative frame paths are
// rewritten relative to `base_dir` so they still resolve to the same files;
// absolute paths are kept as they are.
SampleManifest merge_manifests(const std::vector<SampleManifest>& parts, const std::filesystem::path& base_dir);

}  // namespace freqpad::data
