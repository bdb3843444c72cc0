#include "freqpad/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "freqpad/error.hpp"

namespace freqpad::train {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct NamedTensor {
  std::string name;
  std::string kind;
  Tensor<float>* tensor;
};

std::vector<NamedTensor> model_tensors(network::PadModel<float>& model) {
  std::vector<NamedTensor> out;
  for (auto* p : model.parameters()) out.push_back({p->name, "param", &p->value});
  for (auto* b : model.buffers()) out.push_back({b->name, "buffer", &b->value});
  return out;
}

json shape_json(const Shape& s) { return json::array({s.n, s.c, s.h, s.w}); }

struct RawCheckpoint {
  json header;
  std::vector<char> blob;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "checkpoint: cannot open " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  require(in && std::memcmp(magic, kCheckpointMagic, 8) == 0, "checkpoint: " + path.string() + " is not a freqpad checkpoint");
  require(version == kCheckpointVersion, "checkpoint: unsupported version " + std::to_string(version));
  require(header_len < (1u << 28), "checkpoint: implausible header length");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  require(static_cast<bool>(in), "checkpoint: truncated header");
  RawCheckpoint raw;
  try {
    raw.header = json::parse(header);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint: corrupt header: ") + e.what());
  }
  raw.blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  require(raw.blob.size() == raw.header.value("blob_bytes", std::uint64_t{0}), "checkpoint: blob size mismatch");
  require(fnv1a(raw.blob.data(), raw.blob.size()) == raw.header.value("blob_fnv1a", std::uint64_t{0}),
          "checkpoint: blob checksum mismatch");
  return raw;
}

// name -> (offset, shape) from the tensor table.
std::map<std::string, std::pair<std::uint64_t, Shape>> tensor_table(const json& header) {
  std::map<std::string, std::pair<std::uint64_t, Shape>> out;
  for (const auto& t : header.at("tensors")) {
    const auto s = t.at("shape");
    out[t.at("name").get<std::string>()] = {t.at("offset").get<std::uint64_t>(),
                                            Shape{s[0].get<int>(), s[1].get<int>(), s[2].get<int>(), s[3].get<int>()}};
  }
  return out;
}

void copy_out(const RawCheckpoint& raw, std::uint64_t offset, Tensor<float>& dst) {
  const std::uint64_t bytes = dst.size() * sizeof(float);
  require(offset + bytes <= raw.blob.size(), "checkpoint: tensor extends past the blob");
  std::memcpy(dst.data(), raw.blob.data() + offset, bytes);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, network::PadModel<float>& model, const TrainConfig& config,
                     const json& training) {
  std::vector<char> blob;
  json table = json::array();
  for (const auto& t : model_tensors(model)) {
    const std::uint64_t offset = blob.size();
    const auto* bytes = reinterpret_cast<const char*>(t.tensor->data());
    blob.insert(blob.end(), bytes, bytes + t.tensor->size() * sizeof(float));
    table.push_back({{"name", t.name}, {"kind", t.kind}, {"shape", shape_json(t.tensor->shape())}, {"offset", offset}});
  }
  if (const auto* mfd = model.mfd()) {
    const auto& base = mfd->bank().base_masks();
    const std::uint64_t offset = blob.size();
    const auto* bytes = reinterpret_cast<const char*>(base.data());
    blob.insert(blob.end(), bytes, bytes + base.size() * sizeof(float));
    table.push_back({{"name", "mfd.base_masks"}, {"kind", "constant"}, {"shape", shape_json(base.shape())}, {"offset", offset}});
  }
  json header = {{"format", "freqpad-checkpoint"},
                 {"config", to_json(config)},
                 {"backbone",
                  {{"name", config.model.backbone.name},
                   {"stage_channels", config.model.backbone.stage_channels},
                   {"stage_spatial", config.model.backbone.stage_spatial}}},
                 {"training", training},
                 {"tensors", table},
                 {"blob_bytes", static_cast<std::uint64_t>(blob.size())},
                 {"blob_fnv1a", fnv1a(blob.data(), blob.size())}};
  const std::string text = header.dump();
  const std::uint64_t header_len = text.size();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "checkpoint: cannot write " + tmp.string());
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    require(static_cast<bool>(out), "checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const RawCheckpoint raw = read_raw(path);
  LoadedCheckpoint out;
  out.meta.config = config_from_json(raw.header.at("config"));
  out.meta.training = raw.header.value("training", json::object());
  // Stored weights replace any pretrained initialization.
  auto cfg = out.meta.config.model;
  cfg.backbone.pretrained_weights_path.reset();
  out.model = std::make_unique<network::PadModel<float>>(cfg);

  auto table = tensor_table(raw.header);
  for (const auto& t : model_tensors(*out.model)) {
    auto it = table.find(t.name);
    require(it != table.end(), "checkpoint: missing tensor '" + t.name + "'");
    require(it->second.second == t.tensor->shape(), "checkpoint: shape mismatch for '" + t.name + "'");
    copy_out(raw, it->second.first, *t.tensor);
    table.erase(it);
  }
  if (auto* mfd = out.model->mfd()) {
    auto it = table.find("mfd.base_masks");
    require(it != table.end(), "checkpoint: missing base masks");
    Tensor<float> stored(it->second.second);
    require(stored.shape() == mfd->bank().base_masks().shape(), "checkpoint: base mask shape mismatch");
    copy_out(raw, it->second.first, stored);
    const auto& rebuilt = mfd->bank().base_masks();
    require(std::memcmp(stored.data(), rebuilt.data(), stored.size() * sizeof(float)) == 0,
            "checkpoint: stored base masks differ from the configured band geometry");
    table.erase(it);
  }
  require(table.empty(), "checkpoint: unexpected tensor '" + (table.empty() ? std::string() : table.begin()->first) + "'");
  return out;
}

std::size_t load_matching_weights(const std::filesystem::path& path, network::PadModel<float>& model) {
  const RawCheckpoint raw = read_raw(path);
  const auto table = tensor_table(raw.header);
  std::size_t copied = 0;
  for (const auto& t : model_tensors(model)) {
    auto it = table.find(t.name);
    if (it == table.end() || !(it->second.second == t.tensor->shape())) continue;
    copy_out(raw, it->second.first, *t.tensor);
    ++copied;
  }
  return copied;
}

}  // namespace freqpad::train
