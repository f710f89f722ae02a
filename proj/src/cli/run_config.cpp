#include "focusclf/cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "focusclf/errors.hpp"
#include "focusclf/rng.hpp"

namespace focusclf::cli {

using nlohmann::json;

cnn::ModelConfig RunConfig::model_config() const {
  cnn::ModelConfig c = model;
  c.channels = modalities;
  c.input_size = patch_size;
  c.seed = require_seed();
  return c;
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("a seed is required (set \"seed\" in the config or pass --seed)");
  return *seed;
}

void RunConfig::validate(bool need_manifest) const {
  require_seed();
  if (modalities.empty()) throw ConfigError("no modalities configured");
  if (folds < 2) throw ConfigError("at least two folds are required");
  if (label_noise < 0.0 || label_noise > 1.0) throw ConfigError("label noise must lie in [0, 1]");
  grid.validate();
  model_config().validate();
  welm::parse_taps(taps);
  if (need_manifest) {
    if (manifest.empty()) throw ConfigError("no manifest given (--manifest or \"manifest\")");
    if (!std::filesystem::exists(manifest)) throw InputError("manifest not found: " + manifest.string());
    if (!data_root.empty() && !std::filesystem::is_directory(data_root)) {
      throw InputError("data root is not a directory: " + data_root.string());
    }
  }
}

json to_json(const RunConfig& c) {
  return json{{"manifest", c.manifest.string()},
              {"data_root", c.data_root.string()},
              {"out", c.out.string()},
              {"modalities", c.modalities},
              {"patch_size", c.patch_size},
              {"policy", data::to_string(c.policy)},
              {"model", cnn::to_json(c.model)},
              {"folds", c.folds},
              {"label_noise", c.label_noise},
              {"taps", c.taps},
              {"pooling", welm::to_string(c.pooling)},
              {"grid", {{"C", c.grid.C}, {"gamma", c.grid.gamma}}},
              {"standardize", c.standardize},
              {"sweep_fold", c.sweep_fold},
              {"combos", c.combos},
              {"perplexity", c.perplexity},
              {"tsne_iterations", c.tsne_iterations},
              {"cam_epochs", c.cam_epochs},
              {"cam_full_finetune", c.cam_full_finetune},
              {"cam_size", c.cam_size},
              {"seed", c.seed ? json(*c.seed) : json(nullptr)}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    c.manifest = j.value("manifest", std::string());
    c.data_root = j.value("data_root", std::string());
    c.out = j.value("out", std::string());
    c.modalities = j.value("modalities", c.modalities);
    c.patch_size = j.value("patch_size", c.patch_size);
    if (j.contains("policy")) c.policy = data::parse_policy(j.at("policy").get<std::string>());
    if (j.contains("model")) c.model = cnn::model_config_from_json(j.at("model"));
    c.folds = j.value("folds", c.folds);
    c.label_noise = j.value("label_noise", c.label_noise);
    c.taps = j.value("taps", c.taps);
    if (j.contains("pooling")) c.pooling = welm::parse_pooling(j.at("pooling").get<std::string>());
    if (j.contains("grid")) {
      c.grid.C = j.at("grid").value("C", c.grid.C);
      c.grid.gamma = j.at("grid").value("gamma", c.grid.gamma);
    }
    c.standardize = j.value("standardize", c.standardize);
    c.sweep_fold = j.value("sweep_fold", c.sweep_fold);
    c.combos = j.value("combos", c.combos);
    c.perplexity = j.value("perplexity", c.perplexity);
    c.tsne_iterations = j.value("tsne_iterations", c.tsne_iterations);
    c.cam_epochs = j.value("cam_epochs", c.cam_epochs);
    c.cam_full_finetune = j.value("cam_full_finetune", c.cam_full_finetune);
    c.cam_size = j.value("cam_size", c.cam_size);
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  // Relative paths inside a config file are relative to the file itself.
  const auto base = path.parent_path();
  for (auto* p : {&c.manifest, &c.data_root, &c.out}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return c;
}

std::string fingerprint(const json& j) { return fmt::format("{:016x}", fnv1a64(j.dump())); }

std::string fingerprint(const RunConfig& config) { return fingerprint(to_json(config)); }

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace focusclf::cli
