#include "focusclf/data/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "focusclf/errors.hpp"

namespace focusclf::data {

bool is_t2w(const std::string& modality) {
  std::string u;
  for (char c : modality) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return u == "T2W" || u == "T2";
}

double percentile(std::vector<float> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (static_cast<double>(values[hi]) - values[lo]);
}

Volume clip_top_percentile(const Volume& volume, double q) {
  const auto cap = static_cast<float>(percentile(volume.voxels, q));
  Volume out = volume;
  for (float& v : out.voxels) v = std::min(v, cap);
  return out;
}

NormalizedCase normalize_case(const std::map<std::string, Volume>& volumes) {
  if (volumes.empty()) throw InputError("normalize_case: no volumes");
  NormalizedCase result;
  for (const auto& [name, source] : volumes) {
    if (source.voxels.empty()) throw InputError("normalize_case: modality " + name + " is empty");
    for (float v : source.voxels) {
      if (!std::isfinite(v)) throw InputError("normalize_case: modality " + name + " has non-finite voxels");
    }
    Volume vol = is_t2w(name) ? clip_top_percentile(source, 0.99) : source;
    auto [mn, mx] = std::minmax_element(vol.voxels.begin(), vol.voxels.end());
    const float lo = *mn, hi = *mx;
    if (hi <= lo) {
      std::fill(vol.voxels.begin(), vol.voxels.end(), 0.0f);
      result.constant_modalities.insert(name);
    } else if (!(lo == 0.0f && hi == 1.0f)) {
      const double scale = 1.0 / (static_cast<double>(hi) - lo);
      for (float& v : vol.voxels) v = static_cast<float>((static_cast<double>(v) - lo) * scale);
    }
    result.volumes.emplace(name, std::move(vol));
  }
  return result;
}

}  // namespace focusclf::data
