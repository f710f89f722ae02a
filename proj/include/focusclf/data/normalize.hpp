#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "focusclf/data/volume.hpp"

namespace focusclf::data {

/// True for T2-weighted modality names ("T2W", "T2", case-insensitive).
bool is_t2w(const std::string& modality);

/// Linear-interpolated percentile (q in [0,1]) of the values, as numpy's default.
double percentile(std::vector<float> values, double q);

/// Clips every voxel above the q-th percentile down to that percentile.
Volume clip_top_percentile(const Volume& volume, double q);

struct NormalizedCase {
  std::map<std::string, Volume> volumes;
  std::set<std::string> constant_modalities;  // emitted as all-zero volumes
};

/// Per-patient, per-modality normalization: T2W gets its top 1% clipped, then
/// every modality is min-max scaled to [0,1] over the whole volume.
NormalizedCase normalize_case(const std::map<std::string, Volume>& volumes);

}  // namespace focusclf::data
