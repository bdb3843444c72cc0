// Command-line front end: data generation and validation, training,
// evaluation, decomposition dumps, ablations and protocol runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "freqpad/data/dataset.hpp"
#include "freqpad/data/npy.hpp"
#include "freqpad/data/synthetic.hpp"
#include "freqpad/error.hpp"
#include "freqpad/eval/embedding.hpp"
#include "freqpad/eval/metrics.hpp"
#include "freqpad/freq/decomposition.hpp"
#include "freqpad/train/checkpoint.hpp"
#include "freqpad/train/experiments.hpp"

namespace fs = std::filesystem;
using namespace freqpad;
using nlohmann::json;

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string manifest;
  std::string out;
};

void add_config_args(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.config, "JSON config file (defaults apply when omitted)");
  cmd->add_option("-s,--set", a.overrides, "Override a config key, e.g. optim.lr0=0.01")->take_all();
  cmd->add_option("-m,--manifest", a.manifest, "Sample manifest (overrides data.manifest)");
  cmd->add_option("-o,--out", a.out, "Output directory (overrides output_dir)");
}

train::TrainConfig resolve(const ConfigArgs& a) {
  auto overrides = a.overrides;
  if (!a.manifest.empty()) overrides.push_back("data.manifest=" + json(a.manifest).dump());
  if (!a.out.empty()) overrides.push_back("output_dir=" + json(a.out).dump());
  auto cfg = train::resolve_config(a.config, overrides);
  require(!cfg.data.manifest.empty(), "no manifest given (use --manifest or data.manifest)");
  return cfg;
}

data::SampleManifest load_valid_manifest(const std::string& path) {
  auto m = data::read_manifest(path);
  const auto issues = data::validate_manifest(m);
  if (!issues.empty()) {
    for (const auto& i : issues) std::cerr << path << ": row " << i.row + 1 << ": " << i.message << "\n";
    throw ValidationError("manifest " + path + " has " + std::to_string(issues.size()) + " invalid record(s)");
  }
  return m;
}

void print_epoch(const train::EpochLog& e) {
  std::fprintf(stderr, "epoch %3d  lr %.3g  lambda1 %g  train %.5f  dev %.5f  monitor %.5f  dev_acer %s%%  dev_auc %.4f%s\n",
               e.epoch, e.lr, e.lambda1, e.train_loss, e.dev_loss, e.dev_monitor,
               eval::format_percent(e.dev_acer).c_str(), e.dev_auc, e.improved ? "  *" : "");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << text;
}

data::Split parse_split_arg(const std::string& s) { return data::parse_split(s); }

int cmd_make_synthetic(const data::SyntheticSpec& spec, const std::string& modes, const std::string& out) {
  data::SyntheticSpec s = spec;
  s.attack_modes.clear();
  std::stringstream ss(modes);
  for (std::string m; std::getline(ss, m, ',');) s.attack_modes.push_back(data::parse_attack_mode(m));
  const auto manifest = data::generate_synthetic(s, out);
  std::printf("wrote %zu frames to %s\n", manifest.records.size(), (fs::path(out) / "manifest.csv").c_str());
  return 0;
}

int cmd_validate(const std::string& path, bool check_images) {
  const auto m = data::read_manifest(path);
  const auto issues = data::validate_manifest(m, check_images);
  for (const auto& i : issues) std::printf("row %zu: %s\n", i.row + 1, i.message.c_str());
  std::printf("%zu record(s), %zu issue(s)\n", m.records.size(), issues.size());
  return issues.empty() ? 0 : 2;
}

int cmd_merge(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<data::SampleManifest> parts;
  for (const auto& in : inputs) parts.push_back(data::read_manifest(in));
  const auto merged = data::merge_manifests(parts, fs::path(out).parent_path());
  data::write_manifest(out, merged);
  std::printf("wrote %zu record(s) to %s\n", merged.records.size(), out.c_str());
  return 0;
}

int cmd_train(const ConfigArgs& a, const std::string& preset) {
  auto cfg = resolve(a);
  if (!preset.empty()) train::apply_preset(cfg, preset);
  const auto manifest = load_valid_manifest(cfg.data.manifest);
  const auto result = train::train(cfg, manifest, print_epoch);
  std::printf("best epoch %d (%s %.6f), %zu epoch(s)%s\ncheckpoint: %s\nlog: %s\n", result.best_epoch,
              to_string(cfg.monitor).c_str(), result.best_monitor, result.log.size(),
              result.early_stopped ? ", early stopped" : "", result.checkpoint.c_str(), result.log_path.c_str());
  if (!result.issues.empty()) std::printf("%zu frame(s) failed to load; see load_issues.json\n", result.issues.size());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_path, const std::string& split,
             const std::string& threshold_split, const std::string& out) {
  auto ckpt = train::load_checkpoint(checkpoint);
  const auto manifest = load_valid_manifest(manifest_path);
  const auto& cfg = ckpt.meta.config;
  const auto eval_set = train::select_split(manifest, cfg, parse_split_arg(split));
  require(!eval_set.records.empty(), "no records in split '" + split + "'");
  std::vector<data::LoadIssue> issues;
  train::SplitEvaluation ev;
  if (threshold_split == "same") {
    ev = train::evaluate_split(*ckpt.model, cfg, eval_set, nullptr, issues, split);
  } else {
    const auto ref = train::select_split(manifest, cfg, parse_split_arg(threshold_split));
    ev = train::evaluate_split(*ckpt.model, cfg, eval_set, &ref, issues, split);
  }
  fs::create_directories(out);
  eval::write_scores(fs::path(out) / "scores.csv", ev.eval.videos);
  write_text(fs::path(out) / "report.json", eval::to_json(ev.report).dump(2) + "\n");
  std::printf("%s", eval::render_table(std::span(&ev.report, 1)).c_str());
  std::printf("threshold %.6f (%s EER)\n", ev.report.threshold, threshold_split.c_str());
  for (const auto& i : issues) std::fprintf(stderr, "skipped %s: %s\n", i.frame_path.c_str(), i.message.c_str());
  return 0;
}

int cmd_decompose(const std::vector<std::string>& inputs, const std::string& checkpoint, int size,
                  const std::string& geometry, bool normalize, bool pngs, const std::string& masks_out,
                  const std::string& out) {
  std::unique_ptr<train::LoadedCheckpoint> ckpt;
  std::unique_ptr<freq::FilterBank<float>> own_bank;
  const freq::FilterBank<float>* bank = nullptr;
  data::Normalization norm;
  if (!checkpoint.empty()) {
    ckpt = std::make_unique<train::LoadedCheckpoint>(train::load_checkpoint(checkpoint));
    require(ckpt->model->mfd() != nullptr, "checkpoint has no frequency stream");
    bank = &ckpt->model->mfd()->bank();
    size = ckpt->meta.config.model.input_size;
    norm = ckpt->meta.config.data.normalization;
  } else {
    own_bank = std::make_unique<freq::FilterBank<float>>(
        freq::init_filter_bank<float>(size, size, 0, freq::parse_band_geometry(geometry)));
    bank = own_bank.get();
  }
  fs::create_directories(out);
  if (!masks_out.empty()) {
    std::ofstream m(masks_out);
    require(static_cast<bool>(m), "cannot write " + masks_out);
    for (int b = 0; b < bank->n_bands(); ++b) {
      const auto f = bank->combined_filter(b);
      m << "# band " << freq::to_string(static_cast<freq::Band>(b)) << " " << f.rows() << "x" << f.cols() << "\n";
      char buf[32];
      for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
          std::snprintf(buf, sizeof buf, "%.6g", static_cast<double>(f(r, c)));
          m << (c ? " " : "") << buf;
        }
        m << "\n";
      }
    }
  }
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> dir;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file()) dir.push_back(e.path());
      std::sort(dir.begin(), dir.end());
      files.insert(files.end(), dir.begin(), dir.end());
    } else {
      files.emplace_back(in);
    }
  }
  for (const auto& file : files) {
    const cv::Mat rgb = data::crop_and_resize(data::read_rgb01(file), std::nullopt, size);
    const auto tensor = data::to_tensor(rgb, normalize ? norm : data::Normalization{{0, 0, 0}, {1, 1, 1}});
    const auto stack = freq::decompose(tensor, *bank);
    const fs::path stem = fs::path(out) / file.stem();
    data::write_npy(stem.string() + ".npy", stack.components);
    if (pngs) {
      for (int b = 0; b < bank->n_bands(); ++b) {
        cv::Mat vis(size, size, CV_32FC3);
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) vis.at<cv::Vec3f>(y, x)[2 - c] = stack.components.at(0, b * 3 + c, y, x);
        cv::Mat u8;
        cv::normalize(vis, vis, 0.0, 255.0, cv::NORM_MINMAX);
        vis.convertTo(u8, CV_8UC3);
        const auto name = stem.string() + "_" + freq::to_string(static_cast<freq::Band>(b)) + ".png";
        require(cv::imwrite(name, u8), "cannot write " + name);
      }
    }
    std::printf("%s -> %s.npy\n", file.c_str(), stem.c_str());
  }
  return 0;
}

int cmd_export_embeddings(const std::string& checkpoint, const std::string& manifest_path, const std::string& split,
                          const std::string& out_csv, const std::string& reduced_csv, const std::string& plot) {
  auto ckpt = train::load_checkpoint(checkpoint);
  const auto manifest = load_valid_manifest(manifest_path);
  const auto set = train::select_split(manifest, ckpt.meta.config, parse_split_arg(split));
  require(!set.records.empty(), "no records in split '" + split + "'");
  std::vector<data::LoadIssue> issues;
  const auto ev = train::evaluate(*ckpt.model, ckpt.meta.config, set, 0, issues, true);
  std::ofstream out(out_csv);
  require(static_cast<bool>(out), "cannot write " + out_csv);
  const std::size_t dim = ev.frames.front().embedding.size();
  out << "video_id,frame_id,label,pai";
  for (std::size_t d = 0; d < dim; ++d) out << ",e" << d;
  out << "\n";
  Eigen::MatrixXd mat(static_cast<Eigen::Index>(ev.frames.size()), static_cast<Eigen::Index>(dim));
  std::vector<std::string> groups;
  char buf[32];
  for (std::size_t i = 0; i < ev.frames.size(); ++i) {
    const auto& rec = set.records[ev.frame_records[i]];
    out << rec.video_id << ',' << rec.frame_path << ',' << data::to_string(rec.label) << ',' << rec.pai;
    for (std::size_t d = 0; d < dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(ev.frames[i].embedding[d]));
      out << ',' << buf;
      mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = ev.frames[i].embedding[d];
    }
    out << "\n";
    groups.push_back(rec.label == data::Label::BonaFide ? "bona_fide" : rec.pai);
  }
  if (!reduced_csv.empty() || !plot.empty()) {
    const auto red = eval::reduce_embeddings(mat);
    if (!reduced_csv.empty()) {
      std::ofstream r(reduced_csv);
      require(static_cast<bool>(r), "cannot write " + reduced_csv);
      for (Eigen::Index i = 0; i < red.reduced.rows(); ++i) {
        for (Eigen::Index j = 0; j < red.reduced.cols(); ++j) {
          std::snprintf(buf, sizeof buf, "%.9g", red.reduced(i, j));
          r << (j ? "," : "") << buf;
        }
        r << "\n";
      }
    }
    if (!plot.empty()) eval::write_scatter_png(plot, red.coords, groups);
  }
  std::printf("%zu embedding(s) of dimension %zu -> %s\n", ev.frames.size(), dim, out_csv.c_str());
  return 0;
}

int cmd_report(const std::vector<std::string>& files) {
  std::vector<eval::MetricReport> reports;
  for (const auto& f : files) {
    std::ifstream in(f);
    require(static_cast<bool>(in), "cannot open " + f);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError(f + ": " + e.what());
    }
    if (j.contains("folds")) {
      for (const auto& r : j.at("folds")) reports.push_back(eval::report_from_json(r));
    } else {
      reports.push_back(eval::report_from_json(j));
      if (reports.back().name.empty()) reports.back().name = fs::path(f).parent_path().filename().string();
    }
  }
  std::printf("%s", eval::render_table(reports).c_str());
  return 0;
}

int cmd_ablate(const ConfigArgs& a, std::vector<std::string> presets, const std::vector<std::uint64_t>& seeds) {
  auto cfg = resolve(a);
  const auto manifest = load_valid_manifest(cfg.data.manifest);
  if (presets.empty()) presets = train::kPresets;
  const auto result = train::run_ablation(cfg, manifest, presets, seeds, print_epoch);
  std::printf("%s", train::render_ablation_table(result).c_str());
  return 0;
}

int cmd_protocol(const ConfigArgs& a, const std::string& protocol_path) {
  auto cfg = resolve(a);
  const auto protocol = train::load_protocol(protocol_path);
  const auto manifest = load_valid_manifest(cfg.data.manifest);
  fs::create_directories(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / "resolved_config.json", train::to_json(cfg).dump(2) + "\n");
  const auto result = train::run_protocol(protocol, cfg, manifest, print_epoch);
  std::printf("%s", eval::render_table(result.folds).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"freqpad: frequency-aware face presentation attack detection"};
  app.require_subcommand(1);
  int code = 0;

  data::SyntheticSpec syn;
  std::string syn_modes = "lowpass_print,moire_replay", syn_out;
  auto* make = app.add_subcommand("make-synthetic", "Generate a synthetic bona fide / attack corpus");
  make->add_option("-o,--out", syn_out, "Output directory")->required();
  make->add_option("--videos", syn.n_videos_per_class, "Videos per class")->capture_default_str();
  make->add_option("--frames", syn.frames_per_video, "Frames per video")->capture_default_str();
  make->add_option("--size", syn.image_size, "Image side in pixels")->capture_default_str();
  make->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  make->add_option("--dataset-id", syn.dataset_id, "dataset_id column value")->capture_default_str();
  make->add_option("--modes", syn_modes, "Comma-separated attack modes")->capture_default_str();
  make->add_option("--domain-shift", syn.domain_shift, "Capture-condition shift")->capture_default_str();
  make->callback([&] { code = cmd_make_synthetic(syn, syn_modes, syn_out); });

  std::string val_path;
  bool val_images = false;
  auto* validate = app.add_subcommand("validate-manifest", "Check manifest invariants");
  validate->add_option("manifest", val_path, "Manifest CSV")->required();
  validate->add_flag("--check-images", val_images, "Also open every frame and check crop bounds");
  validate->callback([&] { code = cmd_validate(val_path, val_images); });

  std::vector<std::string> merge_inputs;
  std::string merge_out;
  auto* merge = app.add_subcommand("merge-manifests", "Concatenate manifests into one");
  merge->add_option("inputs", merge_inputs, "Manifest CSVs")->required();
  merge->add_option("-o,--out", merge_out, "Output manifest CSV")->required();
  merge->callback([&] { code = cmd_merge(merge_inputs, merge_out); });

  ConfigArgs train_args;
  std::string train_preset;
  auto* trainc = app.add_subcommand("train", "Train a model");
  add_config_args(trainc, train_args);
  trainc->add_option("--preset", train_preset, "Ablation preset applied on top of the config");
  trainc->callback([&] { code = cmd_train(train_args, train_preset); });

  std::string ev_ckpt, ev_manifest, ev_split = "test", ev_thr = "dev", ev_out = "eval_out";
  auto* evalc = app.add_subcommand("eval", "Score a split with a checkpoint");
  evalc->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  evalc->add_option("-m,--manifest", ev_manifest, "Manifest CSV")->required();
  evalc->add_option("--split", ev_split, "Split to score")->capture_default_str();
  evalc->add_option("--threshold-split", ev_thr, "Split whose EER fixes the threshold, or 'same'")->capture_default_str();
  evalc->add_option("-o,--out", ev_out, "Output directory")->capture_default_str();
  evalc->callback([&] { code = cmd_eval(ev_ckpt, ev_manifest, ev_split, ev_thr, ev_out); });

  std::vector<std::string> dec_inputs;
  std::string dec_ckpt, dec_geom = "anti_diagonal", dec_masks, dec_out = "decomposed";
  int dec_size = 224;
  bool dec_norm = false, dec_png = false;
  auto* dec = app.add_subcommand("decompose", "Write the 4-band frequency decomposition of images");
  dec->add_option("inputs", dec_inputs, "Image files or directories")->required();
  dec->add_option("--checkpoint", dec_ckpt, "Use the learned masks of a checkpoint");
  dec->add_option("--size", dec_size, "Resize side when no checkpoint is given")->capture_default_str();
  dec->add_option("--geometry", dec_geom, "Band geometry when no checkpoint is given")->capture_default_str();
  dec->add_flag("--normalize", dec_norm, "Apply the mean/std normalization first");
  dec->add_flag("--png", dec_png, "Also write min-max normalized per-band PNGs");
  dec->add_option("--masks-out", dec_masks, "Dump the combined band filters as text");
  dec->add_option("-o,--out", dec_out, "Output directory")->capture_default_str();
  dec->callback([&] { code = cmd_decompose(dec_inputs, dec_ckpt, dec_size, dec_geom, dec_norm, dec_png, dec_masks, dec_out); });

  std::string emb_ckpt, emb_manifest, emb_split = "test", emb_out, emb_reduced, emb_plot;
  auto* emb = app.add_subcommand("export-embeddings", "Export pooled S4 embeddings as CSV");
  emb->add_option("--checkpoint", emb_ckpt, "Checkpoint file")->required();
  emb->add_option("-m,--manifest", emb_manifest, "Manifest CSV")->required();
  emb->add_option("--split", emb_split, "Split to export")->capture_default_str();
  emb->add_option("-o,--out", emb_out, "Embedding CSV")->required();
  emb->add_option("--reduced", emb_reduced, "Also write the PCA-128 matrix as CSV");
  emb->add_option("--plot", emb_plot, "Also write a PCA 2-D scatter PNG");
  emb->callback([&] { code = cmd_export_embeddings(emb_ckpt, emb_manifest, emb_split, emb_out, emb_reduced, emb_plot); });

  std::vector<std::string> rep_files;
  auto* rep = app.add_subcommand("report", "Tabulate metric report JSON files");
  rep->add_option("reports", rep_files, "report.json or protocol_report.json files")->required();
  rep->callback([&] { code = cmd_report(rep_files); });

  ConfigArgs abl_args;
  std::vector<std::string> abl_presets;
  std::vector<std::uint64_t> abl_seeds{0};
  auto* abl = app.add_subcommand("ablate", "Train and test the ablation presets");
  add_config_args(abl, abl_args);
  abl->add_option("--presets", abl_presets, "Subset of rgb_bce rgb_mfd_bce full_bce full_flsl");
  abl->add_option("--seeds", abl_seeds, "Seeds per preset")->capture_default_str();
  abl->callback([&] { code = cmd_ablate(abl_args, abl_presets, abl_seeds); });

  ConfigArgs proto_args;
  std::string proto_file;
  auto* proto = app.add_subcommand("protocol", "Run an intra- or cross-dataset protocol");
  add_config_args(proto, proto_args);
  proto->add_option("-p,--protocol", proto_file, "Protocol JSON file")->required();
  proto->callback([&] { code = cmd_protocol(proto_args, proto_file); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}
