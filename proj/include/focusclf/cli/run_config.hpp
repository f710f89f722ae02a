#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "focusclf/cnn/model.hpp"
#include "focusclf/data/augment.hpp"
#include "focusclf/welm/features.hpp"
#include "focusclf/welm/grid.hpp"

namespace focusclf::cli {

/// Declarative run description; JSON on disk, with command-line overrides.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path data_root;  // empty: paths resolve against the manifest's directory
  std::filesystem::path out;
  std::vector<std::string> modalities{"T2W", "ADC", "DWI_b50"};
  std::size_t patch_size = 32;
  data::AugmentPolicy policy = data::AugmentPolicy::Policy2;
  cnn::ModelConfig model;
  std::size_t folds = 10;
  double label_noise = 0.0;
  std::string taps = "C1+C4";
  welm::Pooling pooling = welm::Pooling::ChannelAverage;
  welm::HyperGrid grid = welm::HyperGrid::defaults();
  bool standardize = true;
  std::size_t sweep_fold = 6;
  std::vector<std::vector<std::string>> combos;  // empty: the default table filtered to available modalities
  double perplexity = 30.0;
  int tsne_iterations = 1000;
  int cam_epochs = 50;
  bool cam_full_finetune = false;
  std::size_t cam_size = 64;
  std::optional<std::uint64_t> seed;

  /// Copies the shared fields into the model config (channels, input size, seed).
  cnn::ModelConfig model_config() const;
  std::uint64_t require_seed() const;  // ConfigError when unset
  /// Checks value ranges; with `need_manifest` also that the manifest exists.
  void validate(bool need_manifest) const;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Stable hex digest of the canonical JSON form.
std::string fingerprint(const RunConfig& config);
std::string fingerprint(const nlohmann::json& j);

std::vector<std::string> split_list(const std::string& text, char sep);

}  // namespace focusclf::cli
