#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "focusclf/cnn/model.hpp"
#include "focusclf/eval/metrics.hpp"

namespace focusclf::cnn {

// "FCLF" container: magic, u32 version, 4-byte record kind, u32-length JSON
// config block, u32 tensor count, then per tensor (u32 name length, name,
// u32 rank, u32 extents, float32 LE payload), then a u32-length JSON log block.
inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  std::string kind;  // exactly four ASCII characters: "CNNM", "WELM", "CAMH"
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, TensorF>> tensors;
  nlohmann::json log = nlohmann::json::object();

  const TensorF& tensor(const std::string& name) const;  // FormatError when absent
  bool has_tensor(const std::string& name) const;
};

std::vector<std::uint8_t> encode_container(const Container& container);
Container decode_container(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");
void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path, const std::string& expected_kind);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;                 // 0 = the initialized model
  double initial_val_accuracy = eval::kNaN;
  double best_val_accuracy = eval::kNaN;
  bool stopped_early = false;
  eval::MetricsReport best_val;       // full validation metrics of the kept snapshot
};

nlohmann::json to_json(const TrainLog& log);
TrainLog train_log_from_json(const nlohmann::json& j);
nlohmann::json to_json(const eval::MetricsReport& report);
eval::MetricsReport metrics_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelConfig config;
  ModelParamsF params;
  std::optional<numerics::AdamState<float>> adam;
  TrainLog log;
};

Container to_container(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_container(const Container& container);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Restores parameter tensors by name into a model built from `config`;
/// every expected name must be present with the expected shape.
ModelParamsF params_from_container(const Container& container, const ModelConfig& config);

}  // namespace focusclf::cnn
