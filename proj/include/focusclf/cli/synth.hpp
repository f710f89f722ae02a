#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "focusclf/data/manifest.hpp"
#include "focusclf/data/patch.hpp"
#include "focusclf/data/volume.hpp"
#include "focusclf/rng.hpp"

// Synthetic mpMRI-like cohort: one lesion per patient, three registered
// channels, class-dependent blob contrast.
namespace focusclf::cli {

struct SynthOptions {
  std::size_t lesions = 320;
  double ratio = 0.25;  // malignant fraction
  std::uint64_t seed = 7;
  std::size_t depth = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  std::vector<std::string> modalities{"T2W", "ADC", "DWI_b50"};
  double noise = 0.06;             // relative Gaussian noise
  double outlier_fraction = 0.05;  // cases with a few very bright T2W voxels
  /// Only the first modality differs between classes; the others carry the
  /// same blob for both.
  bool first_channel_only = false;

  void validate() const;
  std::size_t malignant_count() const;
};

struct SynthCase {
  data::LesionRecord record;
  std::map<std::string, data::Volume> volumes;
  data::Raster blob_mask;  // centre slice, 1 inside the lesion blob
};

SynthCase synth_case(const SynthOptions& options, std::size_t index, data::Label label);

/// Labels in generation order (seeded shuffle of the malignant/benign counts).
std::vector<data::Label> synth_labels(const SynthOptions& options);

std::vector<SynthCase> synth_cases(const SynthOptions& options);

/// Normalized lesion images for an in-memory cohort.
std::vector<data::LesionImage> synth_lesion_images(const SynthOptions& options, const std::vector<std::string>& channels);

/// Writes `manifest.jsonl` and `volumes/*.mpv` under `out`; returns the manifest.
data::Manifest synth_generate(const SynthOptions& options, const std::filesystem::path& out);

}  // namespace focusclf::cli
