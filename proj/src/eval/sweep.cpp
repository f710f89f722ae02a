#include "focusclf/eval/sweep.hpp"

#include <algorithm>

#include "focusclf/errors.hpp"

namespace focusclf::eval {

std::vector<std::vector<std::string>> default_combos() {
  return {{"T2W"},
          {"ADC"},
          {"DWI_b50"},
          {"T2W", "ADC"},
          {"T2W", "DWI_b50"},
          {"ADC", "DWI_b50"},
          {"T2W", "ADC", "DWI_b50"},
          {"T2W", "ADC", "DWI_b50", "Ktrans"}};
}

std::vector<std::vector<std::string>> available_combos(const std::vector<std::vector<std::string>>& combos,
                                                       const std::vector<std::string>& available) {
  std::vector<std::vector<std::string>> out;
  for (const auto& combo : combos) {
    if (std::all_of(combo.begin(), combo.end(), [&](const std::string& m) {
          return std::find(available.begin(), available.end(), m) != available.end();
        })) {
      out.push_back(combo);
    }
  }
  return out;
}

std::string combo_name(const std::vector<std::string>& channels) {
  std::string out;
  for (const auto& c : channels) out += (out.empty() ? "" : "+") + c;
  return out;
}

data::LesionImage select_channels(const data::LesionImage& lesion, const std::vector<std::string>& channels) {
  if (channels.empty()) throw ConfigError("empty modality combination");
  data::LesionImage out;
  out.record = lesion.record;
  out.center_y = lesion.center_y;
  out.center_x = lesion.center_x;
  out.channels = channels;
  for (const auto& name : channels) {
    auto it = std::find(lesion.channels.begin(), lesion.channels.end(), name);
    if (it == lesion.channels.end()) {
      throw InputError("lesion " + lesion.record.lesion_id + ": modality " + name + " was not loaded");
    }
    out.slices.push_back(lesion.slices[static_cast<std::size_t>(it - lesion.channels.begin())]);
  }
  return out;
}

SweepTable modality_sweep(std::span<const data::LesionImage> lesions, const std::vector<std::vector<std::string>>& combos,
                          const cnn::ModelConfig& config, const cnn::CvOptions& options, std::size_t fold) {
  if (combos.empty()) throw ConfigError("modality sweep needs at least one combination");
  if (fold >= options.folds) throw ConfigError("sweep fold index out of range");
  SweepTable table;
  table.fold = fold;
  for (const auto& combo : combos) {
    std::vector<data::LesionImage> subset;
    subset.reserve(lesions.size());
    for (const auto& l : lesions) subset.push_back(select_channels(l, combo));
    cnn::ModelConfig c = config;
    c.channels = combo;
    cnn::CvOptions o = options;
    o.only_folds = {fold};
    auto result = cnn::cross_validate(subset, c, o);
    table.rows.push_back({combo, result.folds.at(0).metrics});
  }
  return table;
}

}  // namespace focusclf::eval
