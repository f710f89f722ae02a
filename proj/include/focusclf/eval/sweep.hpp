#pragma once

#include <span>
#include <string>
#include <vector>

#include "focusclf/cnn/train.hpp"

namespace focusclf::eval {

struct SweepRow {
  std::vector<std::string> channels;
  MetricsReport metrics;
};

struct SweepTable {
  std::size_t fold = 0;
  std::vector<SweepRow> rows;
};

/// The eight modality combinations of the comparison table.
std::vector<std::vector<std::string>> default_combos();

/// Keeps only combinations whose every modality is in `available`.
std::vector<std::vector<std::string>> available_combos(const std::vector<std::vector<std::string>>& combos,
                                                       const std::vector<std::string>& available);

std::string combo_name(const std::vector<std::string>& channels);

/// Copy of a lesion restricted to `channels`, in that order.
data::LesionImage select_channels(const data::LesionImage& lesion, const std::vector<std::string>& channels);

/// Trains one network per combination on the same fold split and seed and
/// reports validation metrics on `fold`.
SweepTable modality_sweep(std::span<const data::LesionImage> lesions, const std::vector<std::vector<std::string>>& combos,
                          const cnn::ModelConfig& config, const cnn::CvOptions& options, std::size_t fold);

}  // namespace focusclf::eval
