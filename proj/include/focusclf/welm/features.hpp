#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "focusclf/cnn/model.hpp"
#include "focusclf/data/patch.hpp"

namespace focusclf::welm {

enum class Tap { C1, C2, C3, C4, FC1, FC2 };
enum class Pooling { ChannelAverage, Flatten };

std::string to_string(Tap tap);
std::string to_string(Pooling pooling);
Pooling parse_pooling(const std::string& text);

/// "C1+C4" -> {C1, C4}. Unknown names raise InputError.
std::vector<Tap> parse_taps(const std::string& text);
std::string taps_name(std::span<const Tap> taps);

/// The seven tap sets of the layer comparison table.
std::vector<std::vector<Tap>> default_tap_sets();

struct FeatureVector {
  std::string lesion_id;
  int label = -1;  // class index, -1 when unknown
  std::vector<Tap> taps;
  Pooling pooling = Pooling::ChannelAverage;
  std::vector<double> values;
};

std::size_t feature_dimension(const cnn::ModelConfig& config, std::span<const Tap> taps, Pooling pooling);

/// Per-tap feature rows for every patch from one inference pass.
using TapFeatures = std::map<Tap, std::vector<std::vector<double>>>;
TapFeatures extract_tap_features(const cnn::ModelParamsF& params, std::span<const data::Patch> patches, Pooling pooling,
                                 std::size_t batch_size = 64);

/// Concatenates tap rows in the declared order.
std::vector<FeatureVector> compose_features(const TapFeatures& all, std::span<const data::Patch> patches,
                                            std::span<const Tap> taps, Pooling pooling);

std::vector<FeatureVector> extract_features(const cnn::ModelParamsF& params, std::span<const data::Patch> patches,
                                            std::span<const Tap> taps, Pooling pooling = Pooling::ChannelAverage);
FeatureVector extract_features(const cnn::ModelParamsF& params, const data::Patch& patch, std::span<const Tap> taps,
                               Pooling pooling = Pooling::ChannelAverage);

/// Header: lesion_id,label,f0,...; label written as the class index (or empty).
void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features);
std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path);

std::vector<std::vector<double>> feature_matrix(std::span<const FeatureVector> features);
std::vector<int> feature_labels(std::span<const FeatureVector> features);

}  // namespace focusclf::welm
