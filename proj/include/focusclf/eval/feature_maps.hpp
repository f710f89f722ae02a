#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "focusclf/cnn/model.hpp"
#include "focusclf/data/patch.hpp"

namespace focusclf::eval {

/// Elementwise mean over channels of each conv layer's post-activation maps (h×w each).
std::array<TensorD, 4> average_feature_maps(const cnn::ModelParamsF& params, const data::Patch& patch);

/// Mean over the channel axis of one h×w×K map.
TensorD channel_mean(const TensorF& maps);

/// Grayscale P6 image of a map, min-max scaled to 0..255 (constant maps become black).
std::vector<std::uint8_t> grayscale_ppm(const TensorD& map);

/// Writes <stem>_C1.mpv/.ppm … <stem>_C4.mpv/.ppm into `directory`; returns the files written.
std::vector<std::filesystem::path> export_feature_maps(const std::array<TensorD, 4>& maps,
                                                       const std::filesystem::path& directory, const std::string& stem);

}  // namespace focusclf::eval
