#include "focusclf/cli/commands.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "focusclf/cli/run_config.hpp"
#include "focusclf/cli/synth.hpp"
#include "focusclf/cnn/train.hpp"
#include "focusclf/data/bundle.hpp"
#include "focusclf/errors.hpp"
#include "focusclf/eval/feature_maps.hpp"
#include "focusclf/eval/report.hpp"
#include "focusclf/eval/sweep.hpp"
#include "focusclf/eval/tsne.hpp"
#include "focusclf/saliency/cam.hpp"
#include "focusclf/welm/grid.hpp"

namespace focusclf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t default_jobs() {
  if (const char* env = std::getenv("FOCUSCLF_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

void write_run_manifest(const fs::path& directory, const std::string& command, const json& config,
                        const std::vector<fs::path>& artifacts) {
  fs::create_directories(directory);
  // The output location is not part of what was computed.
  json recorded = config;
  if (recorded.is_object()) recorded.erase("out");
  json files = json::array();
  for (const auto& a : artifacts) {
    std::error_code ec;
    const auto rel = fs::relative(a, directory, ec);
    files.push_back(ec || rel.empty() ? a.generic_string() : rel.generic_string());
  }
  const json manifest{{"tool", "focusclf"},
                      {"command", command},
                      {"config", recorded},
                      {"fingerprint", fingerprint(recorded)},
                      {"artifacts", files}};
  eval::write_text_file(directory / "run_manifest.json", manifest.dump(2) + "\n");
}

namespace {

// ---- small CSV helpers ------------------------------------------------------

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, bool required = true) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    if (required) throw FormatError("CSV is missing the '" + name + "' column");
    return header.size();
  }
};

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split_list(line, ',');
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != csv.header.size()) {
      throw FormatError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), n, csv.header.size(),
                                    cells.size()));
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad number for " + what + ": '" + text + "'");
  }
}

// ---- flags ------------------------------------------------------------------

struct Flags {
  std::string config, out, manifest, data_root, modalities, policy, taps, pooling, combos, checkpoint, features;
  std::string train_features, val_features, cv_dir, pred, labels, kernel = "rbf", cam_class = "malignant";
  std::uint64_t seed = 0;
  std::size_t jobs = 1, patch_size = 32, folds = 10, lesions = 320, size = 64, depth = 3, fold = 6, cam_size = 64;
  std::size_t limit = 0, batch = 32;
  int epochs = 100, iterations = 1000, cam_epochs = 50;
  double ratio = 0.25, label_noise = 0.0, perplexity = 30.0, lr = 1e-3, threshold = 0.5, outlier_fraction = 0.05;
  double noise = 0.06;
  bool first_channel_only = false, full_finetune = false, no_standardize = false;

  std::map<std::string, CLI::Option*> options;
  CLI::App* active = nullptr;

  bool has(const std::string& flag) const {
    auto it = options.find(active->get_name() + flag);
    return it != options.end() && it->second->count() > 0;
  }
};

template <typename T>
void add(Flags& f, CLI::App* sub, const std::string& flag, T& var, const std::string& help) {
  f.options[sub->get_name() + flag] = sub->add_option(flag, var, help);
}

void add_flag(Flags& f, CLI::App* sub, const std::string& flag, bool& var, const std::string& help) {
  f.options[sub->get_name() + flag] = sub->add_flag(flag, var, help);
}

void add_run_flags(Flags& f, CLI::App* sub) {
  add(f, sub, "--config", f.config, "JSON run configuration");
  add(f, sub, "--seed", f.seed, "random seed");
  add(f, sub, "--out", f.out, "output directory");
  add(f, sub, "--jobs", f.jobs, "parallel folds/combinations (default: FOCUSCLF_JOBS or 1)");
  add(f, sub, "--manifest", f.manifest, "lesion manifest (JSON lines)");
  add(f, sub, "--data-root", f.data_root, "directory that relative volume paths resolve against");
  add(f, sub, "--modalities", f.modalities, "comma-separated channel list, e.g. T2W,ADC,DWI_b50");
  add(f, sub, "--patch-size", f.patch_size, "patch size S (30, 32, 34 or 64)");
}

void add_train_flags(Flags& f, CLI::App* sub) {
  add(f, sub, "--policy", f.policy, "augmentation policy: none, policy1, policy2");
  add(f, sub, "--epochs", f.epochs, "maximum epochs per fold");
  add(f, sub, "--batch-size", f.batch, "mini-batch size");
  add(f, sub, "--lr", f.lr, "Adam learning rate");
  add(f, sub, "--folds", f.folds, "number of cross-validation folds");
  add(f, sub, "--label-noise", f.label_noise, "fraction of training labels flipped per fold");
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.has("--config") ? load_run_config(f.config) : RunConfig{};
  if (f.has("--seed")) c.seed = f.seed;
  if (f.has("--out")) c.out = f.out;
  if (f.has("--manifest")) c.manifest = f.manifest;
  if (f.has("--data-root")) c.data_root = f.data_root;
  if (f.has("--modalities")) c.modalities = split_list(f.modalities, ',');
  if (f.has("--patch-size")) c.patch_size = f.patch_size;
  if (f.has("--policy")) c.policy = data::parse_policy(f.policy);
  if (f.has("--epochs")) c.model.epochs = f.epochs;
  if (f.has("--batch-size")) c.model.batch_size = f.batch;
  if (f.has("--lr")) c.model.adam.lr = f.lr;
  if (f.has("--folds")) c.folds = f.folds;
  if (f.has("--label-noise")) c.label_noise = f.label_noise;
  if (f.has("--taps")) c.taps = f.taps;
  if (f.has("--pooling")) c.pooling = welm::parse_pooling(f.pooling);
  if (f.has("--no-standardize")) c.standardize = !f.no_standardize;
  if (f.has("--fold")) c.sweep_fold = f.fold;
  if (f.has("--perplexity")) c.perplexity = f.perplexity;
  if (f.has("--iterations")) c.tsne_iterations = f.iterations;
  if (f.has("--cam-epochs")) c.cam_epochs = f.cam_epochs;
  if (f.has("--full-finetune")) c.cam_full_finetune = f.full_finetune;
  if (f.has("--cam-size")) c.cam_size = f.cam_size;
  if (f.has("--combos")) {
    c.combos.clear();
    for (const auto& combo : split_list(f.combos, ';')) c.combos.push_back(split_list(combo, '+'));
  }
  return c;
}

std::size_t jobs_of(const Flags& f) { return f.has("--jobs") ? std::max<std::size_t>(1, f.jobs) : default_jobs(); }

fs::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw ConfigError("no output directory given (--out or \"out\")");
  fs::create_directories(c.out);
  return c.out;
}

data::Manifest open_manifest(const fs::path& path, const fs::path& data_root, bool allow_unknown) {
  if (path.empty()) throw ConfigError("no manifest given (--manifest)");
  if (!fs::exists(path)) throw InputError("manifest not found: " + path.string());
  data::Manifest m = data::load_manifest(path, allow_unknown);
  if (!data_root.empty()) m.directory = data_root;
  if (m.records.empty()) throw InputError("manifest " + path.string() + " lists no lesions");
  return m;
}

cnn::CvOptions cv_options(const RunConfig& c, std::size_t jobs) {
  cnn::CvOptions o;
  o.folds = c.folds;
  o.policy = c.policy;
  o.jobs = jobs;
  o.train_label_noise = c.label_noise;
  return o;
}

std::string fold_file(std::size_t fold) { return fmt::format("fold_{:02d}.ckpt", fold + 1); }

json split_json(const data::FoldSplit& split) {
  json a = json::object();
  for (const auto& [id, fold] : split.assignment) a[id] = fold;
  return json{{"k", split.k}, {"assignment", a}};
}

data::FoldSplit split_from_json(const json& j) {
  data::FoldSplit s;
  s.k = j.at("k").get<std::size_t>();
  for (const auto& [id, fold] : j.at("assignment").items()) s.assignment[id] = fold.get<std::size_t>();
  return s;
}

// ---- subcommands ------------------------------------------------------------

int cmd_synth(const Flags& f, std::ostream& out) {
  if (!f.has("--out")) throw ConfigError("synth needs --out");
  if (!f.has("--seed")) throw ConfigError("synth needs --seed");
  SynthOptions o;
  o.lesions = f.lesions;
  o.ratio = f.ratio;
  o.seed = f.seed;
  o.height = o.width = f.size;
  o.depth = f.depth;
  o.first_channel_only = f.first_channel_only;
  o.outlier_fraction = f.outlier_fraction;
  o.noise = f.noise;
  if (f.has("--modalities")) o.modalities = split_list(f.modalities, ',');
  o.validate();
  const fs::path dir = f.out;
  const auto manifest = synth_generate(o, dir);
  const json config{{"lesions", o.lesions},     {"ratio", o.ratio}, {"seed", o.seed},
                    {"size", o.height},          {"depth", o.depth}, {"modalities", o.modalities},
                    {"noise", o.noise},          {"outlier_fraction", o.outlier_fraction},
                    {"first_channel_only", o.first_channel_only}};
  std::vector<fs::path> artifacts{dir / "manifest.jsonl"};
  for (const auto& r : manifest.records)
    for (const auto& [name, path] : r.modalities) artifacts.push_back(dir / path);
  write_run_manifest(dir, "synth", config, artifacts);
  out << fmt::format("wrote {} lesions ({} malignant, {} benign) to {}\n", manifest.records.size(),
                     data::count_label(manifest.records, data::Label::Malignant),
                     data::count_label(manifest.records, data::Label::Benign), dir.string());
  return 0;
}

int cmd_extract(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  const fs::path dir = require_out(c);
  const auto manifest = open_manifest(c.manifest, c.data_root, true);
  const auto lesions = data::load_lesions(manifest, c.modalities);
  const auto patches = data::original_patches(lesions, c.patch_size);
  data::write_patch_bundle(dir / "patches", patches);
  write_run_manifest(dir, "extract-patches", to_json(c), {dir / "patches"});
  out << fmt::format("extracted {} patches of {}x{}x{}\n", patches.size(), c.patch_size, c.patch_size,
                     c.modalities.size());
  return 0;
}

int cmd_augment(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  const fs::path dir = require_out(c);
  const auto manifest = open_manifest(c.manifest, c.data_root, false);
  const auto lesions = data::load_lesions(manifest, c.modalities);
  Rng rng = Rng(c.require_seed()).substream("augmentation");
  const auto patches = data::augment(lesions, c.patch_size, c.policy, rng);
  data::write_patch_bundle(dir / "patches", patches);
  std::size_t mal = 0;
  for (const auto& p : patches) mal += p.record.label == data::Label::Malignant;
  write_run_manifest(dir, "augment", to_json(c), {dir / "patches"});
  out << fmt::format("{}: {} patches ({} malignant, {} benign)\n", data::to_string(c.policy), patches.size(), mal,
                     patches.size() - mal);
  return 0;
}

int cmd_cv_train(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  c.validate(true);
  const fs::path dir = require_out(c);
  const auto manifest = open_manifest(c.manifest, c.data_root, false);
  const auto lesions = data::load_lesions(manifest, c.modalities);
  auto options = cv_options(c, jobs_of(f));
  const auto result = cnn::cross_validate(lesions, c.model_config(), options);

  std::vector<fs::path> artifacts;
  std::string predictions = "lesion_id,fold,label,p_malignant\n";
  for (const auto& fold : result.folds) {
    const auto path = dir / fold_file(fold.fold);
    cnn::save_checkpoint(path, fold.checkpoint);
    artifacts.push_back(path);
    for (std::size_t i = 0; i < fold.val_ids.size(); ++i) {
      predictions += fmt::format("{},{},{},{}\n", fold.val_ids[i], fold.fold, fold.val_labels[i], fold.val_scores[i]);
    }
  }
  eval::write_text_file(dir / "folds.json", split_json(result.split).dump(2) + "\n");
  eval::write_text_file(dir / "val_predictions.csv", predictions);
  eval::write_text_file(dir / "run.json", to_json(c).dump(2) + "\n");
  const auto rows = eval::cv_rows(result);
  auto report = eval::write_report(dir, "cv_summary", rows, eval::cv_summary_json(result));
  artifacts.insert(artifacts.end(), report.begin(), report.end());
  artifacts.insert(artifacts.end(), {dir / "folds.json", dir / "val_predictions.csv", dir / "run.json"});
  write_run_manifest(dir, "cv-train", to_json(c), artifacts);
  out << eval::format_table(rows, "Cross-validation (" + std::to_string(c.folds) + " folds)");
  return 0;
}

int cmd_predict(const Flags& f, std::ostream& out) {
  if (!f.has("--checkpoint")) throw ConfigError("predict needs --checkpoint");
  RunConfig c = resolve(f);
  const fs::path dir = require_out(c);
  const auto ck = cnn::load_checkpoint(f.checkpoint);
  const auto manifest = open_manifest(c.manifest, c.data_root, true);
  const auto lesions = data::load_lesions(manifest, ck.config.channels);
  const auto patches = data::original_patches(lesions, ck.config.input_size);
  const auto probs = cnn::predict(ck.params, patches);
  std::string csv = "lesion_id,p_malignant,decision\n";
  for (std::size_t i = 0; i < patches.size(); ++i) {
    csv += fmt::format("{},{},{}\n", patches[i].record.lesion_id, probs[i][1], probs[i][1] > probs[i][0] ? 1 : 0);
  }
  eval::write_text_file(dir / "predictions.csv", csv);
  json config = to_json(c);
  config["checkpoint"] = fs::path(f.checkpoint).string();
  write_run_manifest(dir, "predict", config, {dir / "predictions.csv"});
  out << fmt::format("predicted {} lesions\n", patches.size());
  return 0;
}

int cmd_features(const Flags& f, std::ostream& out) {
  if (!f.has("--checkpoint")) throw ConfigError("features needs --checkpoint");
  RunConfig c = resolve(f);
  const fs::path dir = require_out(c);
  const auto ck = cnn::load_checkpoint(f.checkpoint);
  const auto taps = welm::parse_taps(c.taps);
  const auto manifest = open_manifest(c.manifest, c.data_root, true);
  const auto lesions = data::load_lesions(manifest, ck.config.channels);
  const auto patches = data::original_patches(lesions, ck.config.input_size);
  const auto features = welm::extract_features(ck.params, patches, taps, c.pooling);
  welm::write_features_csv(dir / "features.csv", features);
  json config = to_json(c);
  config["checkpoint"] = fs::path(f.checkpoint).string();
  write_run_manifest(dir, "features", config, {dir / "features.csv"});
  out << fmt::format("{} feature vectors of dimension {} ({}, {})\n", features.size(),
                     features.empty() ? 0 : features[0].values.size(), welm::taps_name(taps), welm::to_string(c.pooling));
  return 0;
}

int cmd_welm_csv(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(c);
  const auto train = welm::read_features_csv(f.train_features);
  const auto val = welm::read_features_csv(f.val_features);
  const auto kernel = welm::parse_kernel(f.kernel);
  const auto result = welm::welm_grid_search(welm::feature_matrix(train), welm::feature_labels(train),
                                             welm::feature_matrix(val), welm::feature_labels(val), c.grid, kernel,
                                             c.standardize);
  welm::save_kernel_model(dir / "welm_model.ckpt", result.model);
  json cells = json::array();
  for (const auto& cell : result.cells) {
    cells.push_back({{"C", cell.C}, {"gamma", cell.gamma}, {"metrics", cnn::to_json(cell.metrics)}});
  }
  const std::vector<eval::ReportRow> rows{{fmt::format("C={} gamma={}", result.C, result.gamma), result.best}};
  auto artifacts = eval::write_report(dir, "welm", rows, json{{"C", result.C}, {"gamma", result.gamma}, {"grid", cells}});
  artifacts.push_back(dir / "welm_model.ckpt");
  json config = to_json(c);
  config["train_features"] = f.train_features;
  config["val_features"] = f.val_features;
  config["kernel"] = f.kernel;
  write_run_manifest(dir, "welm", config, artifacts);
  out << eval::format_table(rows, "wELM validation");
  return 0;
}

int cmd_welm_cv(const Flags& f, RunConfig c, std::ostream& out) {
  const fs::path cv_dir = f.cv_dir;
  // The training run's configuration supplies data, folds and seed; flags still win.
  RunConfig trained = load_run_config(cv_dir / "run.json");
  trained.out = c.out;
  if (f.has("--manifest")) trained.manifest = c.manifest;
  if (f.has("--data-root")) trained.data_root = c.data_root;
  if (f.has("--pooling")) trained.pooling = c.pooling;
  if (f.has("--no-standardize")) trained.standardize = c.standardize;
  c = trained;
  const fs::path dir = require_out(c);
  const auto manifest = open_manifest(c.manifest, c.data_root, false);
  const auto lesions = data::load_lesions(manifest, c.modalities);
  std::ifstream split_in(cv_dir / "folds.json");
  if (!split_in) throw InputError("missing folds.json in " + cv_dir.string());
  cnn::CvResult cv;
  try {
    cv.split = split_from_json(json::parse(split_in));
  } catch (const json::exception& e) {
    throw FormatError("folds.json: " + std::string(e.what()));
  }
  for (std::size_t k = 0; k < cv.split.k; ++k) {
    const auto path = cv_dir / fold_file(k);
    if (!fs::exists(path)) continue;
    cnn::FoldResult r;
    r.fold = k;
    r.checkpoint = cnn::load_checkpoint(path);
    cv.folds.push_back(std::move(r));
  }
  if (cv.folds.empty()) throw InputError("no fold checkpoints found in " + cv_dir.string());
  welm::TapTableOptions options;
  options.pooling = c.pooling;
  options.grid = c.grid;
  options.standardize = c.standardize;
  options.kernel = welm::parse_kernel(f.kernel);
  const auto table = welm::welm_tap_table(lesions, cv, cv_options(c, 1), options);
  std::vector<eval::ReportRow> rows;
  json details = json::array();
  for (const auto& row : table) {
    rows.push_back({row.taps, row.average});
    json chosen = json::array();
    for (const auto& [C, g] : row.chosen) chosen.push_back({{"C", C}, {"gamma", g}});
    details.push_back({{"taps", row.taps}, {"folds", eval::to_json(eval::fold_rows(row.folds, row.average))}, {"chosen", chosen}});
  }
  auto artifacts = eval::write_report(dir, "welm_taps", rows, details);
  json config = to_json(c);
  config["cv_dir"] = cv_dir.string();
  write_run_manifest(dir, "welm", config, artifacts);
  out << eval::format_table(rows, "wELM validation by feature tap (mean over folds)");
  return 0;
}

int cmd_welm(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  if (f.has("--cv-dir")) return cmd_welm_cv(f, c, out);
  if (!f.has("--train-features") || !f.has("--val-features")) {
    throw ConfigError("welm needs --cv-dir, or both --train-features and --val-features");
  }
  return cmd_welm_csv(f, c, out);
}

int cmd_cam(const Flags& f, std::ostream& out) {
  if (!f.has("--checkpoint")) throw ConfigError("cam needs --checkpoint");
  RunConfig c = resolve(f);
  const fs::path dir = require_out(c);
  const auto ck = cnn::load_checkpoint(f.checkpoint);
  const std::uint64_t seed = c.require_seed();
  const auto manifest = open_manifest(c.manifest, c.data_root, true);
  const auto lesions = data::load_lesions(manifest, ck.config.channels);
  std::vector<data::LesionImage> labeled;
  for (const auto& l : lesions)
    if (l.record.label != data::Label::Unknown) labeled.push_back(l);
  if (labeled.empty()) throw InputError("cam needs labeled lesions to fine-tune the head");
  const auto train = data::original_patches(labeled, ck.config.input_size);
  Rng rng = Rng(seed).substream("cam");
  saliency::CamTrainOptions options;
  options.max_epochs = c.cam_epochs;
  options.full_finetune = c.cam_full_finetune;
  saliency::CamTrainLog log;
  const auto head = saliency::finetune_cam(saliency::build_cam_head(ck, rng), train, options, rng, &log);
  saliency::save_cam_head(dir / "cam_head.ckpt", head);

  std::vector<int> classes;
  if (f.cam_class == "malignant" || f.cam_class == "both") classes.push_back(1);
  if (f.cam_class == "benign" || f.cam_class == "both") classes.push_back(0);
  if (classes.empty()) throw InputError("--class must be malignant, benign or both");
  const fs::path cam_dir = dir / "cam";
  fs::create_directories(cam_dir);
  std::vector<fs::path> artifacts{dir / "cam_head.ckpt"};
  const std::size_t count = f.limit > 0 ? std::min(f.limit, lesions.size()) : lesions.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto patch = data::extract_patch(lesions[i], std::max(c.cam_size, ck.config.input_size));
    for (int cls : classes) {
      const auto cam = saliency::compute_cam(head, patch, cls);
      const auto stem = cam_dir / fmt::format("{}_class{}", lesions[i].record.lesion_id, cls);
      auto ppm = stem, mpv = stem;
      ppm += ".ppm";
      mpv += ".mpv";
      saliency::export_overlay(cam, patch, ppm);
      data::write_volume(mpv, saliency::raw_cam_volume(cam));
      artifacts.insert(artifacts.end(), {ppm, mpv});
    }
  }
  json config = to_json(c);
  config["checkpoint"] = fs::path(f.checkpoint).string();
  config["class"] = f.cam_class;
  config["limit"] = f.limit;
  eval::write_text_file(dir / "cam_log.json",
                        json{{"losses", log.losses}, {"converged", log.converged}, {"train_accuracy", log.train_accuracy}}
                                .dump(2) + "\n");
  artifacts.push_back(dir / "cam_log.json");
  write_run_manifest(dir, "cam", config, artifacts);
  out << fmt::format("CAM head trained {} epochs (train accuracy {:.2f}); wrote maps for {} lesions\n", log.losses.size(),
                     log.train_accuracy, count);
  return 0;
}

int cmd_tsne(const Flags& f, std::ostream& out) {
  if (!f.has("--features")) throw ConfigError("tsne needs --features");
  RunConfig c = resolve(f);
  const fs::path dir = require_out(c);
  const auto features = welm::read_features_csv(f.features);
  eval::TsneOptions o;
  o.perplexity = c.perplexity;
  o.iterations = c.tsne_iterations;
  o.seed = c.require_seed();
  const auto embedding = eval::tsne(welm::feature_matrix(features), o);
  std::vector<std::string> ids;
  for (const auto& fv : features) ids.push_back(fv.lesion_id);
  const auto labels = welm::feature_labels(features);
  eval::write_embedding_csv(dir / "embedding.csv", ids, labels, embedding);
  json summary{{"initial_kl", embedding.initial_kl}, {"final_kl", embedding.final_kl}, {"points", ids.size()}};
  if (std::all_of(labels.begin(), labels.end(), [](int y) { return y >= 0; }) && ids.size() > 5) {
    summary["knn5_purity"] = eval::knn_purity(embedding.coords, labels, 5);
  }
  eval::write_text_file(dir / "tsne.json", summary.dump(2) + "\n");
  json config = to_json(c);
  config["features"] = f.features;
  write_run_manifest(dir, "tsne", config, {dir / "embedding.csv", dir / "tsne.json"});
  out << fmt::format("t-SNE of {} points: KL {:.4f} -> {:.4f}\n", ids.size(), embedding.initial_kl, embedding.final_kl);
  return 0;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (!f.has("--pred") || !f.has("--labels")) throw ConfigError("eval needs --pred and --labels");
  const Csv pred = read_csv(f.pred);
  const Csv lab = read_csv(f.labels);
  std::map<std::string, int> truth;
  const std::size_t lid = lab.column("lesion_id"), lcol = lab.column("label");
  for (const auto& row : lab.rows) truth[row[lid]] = data::class_index(data::parse_label(row[lcol]));
  const std::size_t pid = pred.column("lesion_id"), pcol = pred.column("p_malignant");
  const std::size_t dcol = pred.column("decision", false);
  std::vector<double> scores;
  std::vector<int> labels, decisions;
  for (const auto& row : pred.rows) {
    auto it = truth.find(row[pid]);
    if (it == truth.end()) throw InputError("no label for lesion " + row[pid]);
    const double s = parse_double(row[pcol], "p_malignant");
    scores.push_back(s);
    labels.push_back(it->second);
    decisions.push_back(dcol < pred.header.size() ? static_cast<int>(parse_double(row[dcol], "decision")) : (s > f.threshold));
  }
  if (scores.empty()) throw InputError("no predictions to evaluate");
  auto report = eval::confusion_metrics(decisions, labels);
  report.auc = eval::roc_auc(scores, labels);
  report.auc_defined = !std::isnan(report.auc);
  const std::vector<eval::ReportRow> rows{{"all", report}};
  out << eval::format_table(rows);
  auto fmt2 = [](double v) { return std::isnan(v) ? std::string("n/a") : fmt::format("{:.2f}", eval::round2(v)); };
  out << fmt::format("(sensitivity, specificity, G-mean) = ({}, {}, {})\n", fmt2(report.sensitivity),
                     fmt2(report.specificity), fmt2(report.g_mean));
  if (f.has("--out")) {
    const fs::path dir = f.out;
    const auto artifacts = eval::write_report(dir, "eval", rows);
    write_run_manifest(dir, "eval", json{{"pred", f.pred}, {"labels", f.labels}, {"threshold", f.threshold}}, artifacts);
  }
  return 0;
}

int cmd_sweep(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  c.validate(true);
  if (c.sweep_fold >= c.folds) {
    throw ConfigError(fmt::format("fold {} is out of range for {} folds", c.sweep_fold, c.folds));
  }
  const fs::path dir = require_out(c);
  const auto manifest = open_manifest(c.manifest, c.data_root, false);
  std::vector<std::vector<std::string>> combos = c.combos;
  std::vector<std::string> available;
  for (const auto& [name, path] : manifest.records.front().modalities) available.push_back(name);
  if (combos.empty()) combos = eval::available_combos(eval::default_combos(), available);
  std::vector<std::string> needed;
  for (const auto& combo : combos)
    for (const auto& m : combo)
      if (std::find(needed.begin(), needed.end(), m) == needed.end()) needed.push_back(m);
  const auto lesions = data::load_lesions(manifest, needed);
  const auto table = eval::modality_sweep(lesions, combos, c.model_config(), cv_options(c, jobs_of(f)), c.sweep_fold);
  const auto rows = eval::sweep_rows(table);
  const auto artifacts = eval::write_report(dir, "sweep", rows, json{{"fold", c.sweep_fold}});
  write_run_manifest(dir, "sweep", to_json(c), artifacts);
  out << eval::format_table(rows, fmt::format("Modality combinations on CV{}", c.sweep_fold + 1));
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"focusclf: prostate lesion classification from mpMRI patches", "focusclf"};
  app.require_subcommand(1);
  Flags f;
  f.jobs = default_jobs();

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add(f, synth, "--out", f.out, "output directory");
  add(f, synth, "--seed", f.seed, "random seed");
  add(f, synth, "--lesions", f.lesions, "number of lesions (one per patient)");
  add(f, synth, "--ratio", f.ratio, "malignant fraction");
  add(f, synth, "--size", f.size, "in-plane volume size");
  add(f, synth, "--depth", f.depth, "slices per volume");
  add(f, synth, "--modalities", f.modalities, "comma-separated channel names");
  add(f, synth, "--noise", f.noise, "relative noise level");
  add(f, synth, "--outlier-fraction", f.outlier_fraction, "fraction of cases with bright T2W outliers");
  add_flag(f, synth, "--first-channel-only", f.first_channel_only, "only the first channel differs between classes");

  auto* extract = app.add_subcommand("extract-patches", "cut unaugmented patches at lesion centres");
  add_run_flags(f, extract);

  auto* augment = app.add_subcommand("augment", "write augmented training patches for every lesion");
  add_run_flags(f, augment);
  add(f, augment, "--policy", f.policy, "augmentation policy: none, policy1, policy2");

  auto* cv = app.add_subcommand("cv-train", "stratified k-fold training of the CNN");
  add_run_flags(f, cv);
  add_train_flags(f, cv);

  auto* predict = app.add_subcommand("predict", "malignancy probabilities from a checkpoint");
  add_run_flags(f, predict);
  add(f, predict, "--checkpoint", f.checkpoint, "trained checkpoint");

  auto* features = app.add_subcommand("features", "intermediate-layer features from a checkpoint");
  add_run_flags(f, features);
  add(f, features, "--checkpoint", f.checkpoint, "trained checkpoint");
  add(f, features, "--taps", f.taps, "layers to tap, e.g. C1+C4 or FC2");
  add(f, features, "--pooling", f.pooling, "channel-average or flatten");

  auto* welm_cmd = app.add_subcommand("welm", "weighted kernel ELM on CNN features");
  add_run_flags(f, welm_cmd);
  add(f, welm_cmd, "--cv-dir", f.cv_dir, "cv-train output: per-fold tap comparison");
  add(f, welm_cmd, "--train-features", f.train_features, "training features CSV");
  add(f, welm_cmd, "--val-features", f.val_features, "validation features CSV");
  add(f, welm_cmd, "--kernel", f.kernel, "rbf or linear");
  add(f, welm_cmd, "--pooling", f.pooling, "channel-average or flatten");
  add_flag(f, welm_cmd, "--no-standardize", f.no_standardize, "skip per-dimension feature scaling");

  auto* cam = app.add_subcommand("cam", "class activation maps");
  add_run_flags(f, cam);
  add(f, cam, "--checkpoint", f.checkpoint, "trained checkpoint");
  add(f, cam, "--cam-size", f.cam_size, "patch size the maps are computed on");
  add(f, cam, "--cam-epochs", f.cam_epochs, "maximum head fine-tuning epochs");
  add_flag(f, cam, "--full-finetune", f.full_finetune, "also update the conv layers");
  add(f, cam, "--class", f.cam_class, "malignant, benign or both");
  add(f, cam, "--limit", f.limit, "export maps for the first N lesions only");

  auto* tsne = app.add_subcommand("tsne", "2-D t-SNE embedding of a features CSV");
  add_run_flags(f, tsne);
  add(f, tsne, "--features", f.features, "features CSV");
  add(f, tsne, "--perplexity", f.perplexity, "target perplexity");
  add(f, tsne, "--iterations", f.iterations, "gradient descent iterations");

  auto* ev = app.add_subcommand("eval", "metrics from predictions and labels");
  add(f, ev, "--pred", f.pred, "CSV with lesion_id,p_malignant[,decision]");
  add(f, ev, "--labels", f.labels, "CSV with lesion_id,label");
  add(f, ev, "--threshold", f.threshold, "probability threshold when no decision column is given");
  add(f, ev, "--out", f.out, "also write reports here");

  auto* sweep = app.add_subcommand("sweep", "one-fold comparison of modality combinations");
  add_run_flags(f, sweep);
  add_train_flags(f, sweep);
  add(f, sweep, "--fold", f.fold, "zero-based fold index");
  add(f, sweep, "--combos", f.combos, "combinations, e.g. 'T2W;ADC;T2W+ADC+DWI_b50'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  f.active = app.get_subcommands().front();
  const std::string name = f.active->get_name();
  try {
    if (name == "synth") return cmd_synth(f, out);
    if (name == "extract-patches") return cmd_extract(f, out);
    if (name == "augment") return cmd_augment(f, out);
    if (name == "cv-train") return cmd_cv_train(f, out);
    if (name == "predict") return cmd_predict(f, out);
    if (name == "features") return cmd_features(f, out);
    if (name == "welm") return cmd_welm(f, out);
    if (name == "cam") return cmd_cam(f, out);
    if (name == "tsne") return cmd_tsne(f, out);
    if (name == "eval") return cmd_eval(f, out);
    if (name == "sweep") return cmd_sweep(f, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  err << "error: unknown subcommand " << name << "\n";
  return 1;
}

}  // namespace focusclf::cli
