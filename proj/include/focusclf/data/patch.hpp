#pragma once

#include <map>
#include <string>
#include <vector>

#include "focusclf/data/manifest.hpp"
#include "focusclf/data/volume.hpp"
#include "focusclf/tensor.hpp"

namespace focusclf::data {

struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  float& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
};

struct Provenance {
  bool rotated = false;
  double angle_deg = 0.0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Patch {
  std::vector<std::string> channels;
  std::size_t size = 0;
  TensorF data;  // S×S×C
  LesionRecord record;
  Provenance provenance;
};

/// The normalized axial slice through a lesion centre, one raster per channel.
/// Everything downstream of ingestion works from this.
struct LesionImage {
  LesionRecord record;
  std::vector<std::string> channels;
  std::vector<Raster> slices;
  int center_y = 0;
  int center_x = 0;
};

/// Top-left corner of an S×S window around (cy, cx): [c - S/2, c + S/2), shifted
/// minimally to lie inside an extent. `fits` is false when the extent is
/// smaller than S (the window then reflect-pads).
struct Window {
  long y0 = 0;
  long x0 = 0;
  bool fits = true;
};

Window patch_window(std::size_t height, std::size_t width, int cy, int cx, std::size_t size);

/// Builds a LesionImage from already-normalized volumes; the channel order is
/// taken from `channels`.
LesionImage slice_lesion(const std::map<std::string, Volume>& volumes, const LesionRecord& record,
                         const std::vector<std::string>& channels);

/// Reads, normalizes and slices every requested modality of a record.
LesionImage load_lesion(const Manifest& manifest, const LesionRecord& record, const std::vector<std::string>& channels);

std::vector<LesionImage> load_lesions(const Manifest& manifest, const std::vector<std::string>& channels);

Patch extract_patch(const LesionImage& lesion, std::size_t size);

Patch extract_patch(const std::map<std::string, Volume>& volumes, const LesionRecord& record, std::size_t size,
                    const std::vector<std::string>& channels);

/// Rotates the lesion neighbourhood by `angle_deg` (counter-clockwise as
/// displayed, y pointing down) about the patch centre. Sampling is bilinear on
/// an (S+8)×(S+8) context window, then centre-cropped to S×S.
Patch rotate_patch(const LesionImage& lesion, std::size_t size, double angle_deg);

Patch rotate_patch(const std::map<std::string, Volume>& volumes, const LesionRecord& record, std::size_t size,
                   double angle_deg, const std::vector<std::string>& channels);

/// Sub-raster [y0, y0+h) × [x0, x0+w); out-of-range reads reflect at the border.
Raster crop_reflect(const Raster& raster, long y0, long x0, std::size_t h, std::size_t w);

}  // namespace focusclf::data
