#include "focusclf/data/patch.hpp"

#include <cmath>
#include <numbers>

#include "focusclf/data/normalize.hpp"
#include "focusclf/errors.hpp"

namespace focusclf::data {
namespace {

long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

long clamp_origin(int center, std::size_t size, std::size_t extent, bool& fits) {
  long origin = static_cast<long>(center) - static_cast<long>(size / 2);
  if (extent < size) {
    fits = false;
    return origin;
  }
  const long max_origin = static_cast<long>(extent - size);
  return std::clamp(origin, 0L, max_origin);
}

float bilinear(const Raster& r, double y, double x) {
  const double max_y = static_cast<double>(r.height - 1), max_x = static_cast<double>(r.width - 1);
  y = std::clamp(y, 0.0, max_y);
  x = std::clamp(x, 0.0, max_x);
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, r.height - 1);
  const std::size_t x1 = std::min(x0 + 1, r.width - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  const double top = (1.0 - fx) * r.at(y0, x0) + fx * r.at(y0, x1);
  const double bottom = (1.0 - fx) * r.at(y1, x0) + fx * r.at(y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

void check_size(std::size_t size) {
  if (size == 0 || size % 2 != 0) throw ConfigError("patch size must be a positive even number, got " + std::to_string(size));
}

Patch empty_patch(const LesionImage& lesion, std::size_t size) {
  Patch p;
  p.channels = lesion.channels;
  p.size = size;
  p.record = lesion.record;
  p.data = TensorF({size, size, lesion.channels.size()});
  return p;
}

}  // namespace

Window patch_window(std::size_t height, std::size_t width, int cy, int cx, std::size_t size) {
  Window w;
  w.y0 = clamp_origin(cy, size, height, w.fits);
  w.x0 = clamp_origin(cx, size, width, w.fits);
  return w;
}

Raster crop_reflect(const Raster& raster, long y0, long x0, std::size_t h, std::size_t w) {
  Raster out{h, w, std::vector<float>(h * w)};
  const long rh = static_cast<long>(raster.height), rw = static_cast<long>(raster.width);
  for (std::size_t y = 0; y < h; ++y) {
    const long sy = reflect_index(y0 + static_cast<long>(y), rh);
    for (std::size_t x = 0; x < w; ++x) {
      const long sx = reflect_index(x0 + static_cast<long>(x), rw);
      out.at(y, x) = raster.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
    }
  }
  return out;
}

LesionImage slice_lesion(const std::map<std::string, Volume>& volumes, const LesionRecord& record,
                         const std::vector<std::string>& channels) {
  if (channels.empty()) throw ConfigError("no channels requested");
  LesionImage img;
  img.record = record;
  img.channels = channels;
  const auto [cz, cy, cx] = record.center;
  const Volume* reference = nullptr;
  for (const auto& name : channels) {
    auto it = volumes.find(name);
    if (it == volumes.end()) throw InputError("lesion " + record.lesion_id + ": missing modality " + name);
    const Volume& v = it->second;
    if (reference && (v.depth != reference->depth || v.height != reference->height || v.width != reference->width)) {
      throw InputError("lesion " + record.lesion_id + ": modality " + name + " is not registered to the others (extent mismatch)");
    }
    reference = &v;
    if (cz < 0 || cy < 0 || cx < 0 || cz >= static_cast<int>(v.depth) || cy >= static_cast<int>(v.height) ||
        cx >= static_cast<int>(v.width)) {
      throw InputError("lesion " + record.lesion_id + ": center lies outside modality " + name);
    }
    Raster r{v.height, v.width, {}};
    const auto begin = v.voxels.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(cz) * v.height * v.width);
    r.values.assign(begin, begin + static_cast<std::ptrdiff_t>(v.height * v.width));
    img.slices.push_back(std::move(r));
  }
  img.center_y = cy;
  img.center_x = cx;
  return img;
}

LesionImage load_lesion(const Manifest& manifest, const LesionRecord& record, const std::vector<std::string>& channels) {
  std::map<std::string, Volume> raw;
  for (const auto& name : channels) {
    const auto path = manifest.resolve(record, name);
    if (!std::filesystem::exists(path)) {
      throw InputError("lesion " + record.lesion_id + ": modality " + name + " file not found: " + path.string());
    }
    raw.emplace(name, read_volume(path));
  }
  return slice_lesion(normalize_case(raw).volumes, record, channels);
}

std::vector<LesionImage> load_lesions(const Manifest& manifest, const std::vector<std::string>& channels) {
  std::vector<LesionImage> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) out.push_back(load_lesion(manifest, r, channels));
  return out;
}

Patch extract_patch(const LesionImage& lesion, std::size_t size) {
  check_size(size);
  Patch p = empty_patch(lesion, size);
  const std::size_t c = lesion.channels.size();
  for (std::size_t k = 0; k < c; ++k) {
    const Raster& slice = lesion.slices[k];
    const Window w = patch_window(slice.height, slice.width, lesion.center_y, lesion.center_x, size);
    const Raster crop = crop_reflect(slice, w.y0, w.x0, size, size);
    for (std::size_t i = 0; i < size * size; ++i) p.data[i * c + k] = crop.values[i];
  }
  return p;
}

Patch extract_patch(const std::map<std::string, Volume>& volumes, const LesionRecord& record, std::size_t size,
                    const std::vector<std::string>& channels) {
  return extract_patch(slice_lesion(volumes, record, channels), size);
}

Patch rotate_patch(const LesionImage& lesion, std::size_t size, double angle_deg) {
  check_size(size);
  Patch p = empty_patch(lesion, size);
  p.provenance = {true, angle_deg};
  const std::size_t c = lesion.channels.size();
  const std::size_t context = size + 8;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double half = static_cast<double>(size) / 2.0 - 0.5;
  for (std::size_t k = 0; k < c; ++k) {
    const Raster& slice = lesion.slices[k];
    const Window pw = patch_window(slice.height, slice.width, lesion.center_y, lesion.center_x, size);
    const int mid_y = static_cast<int>(pw.y0 + static_cast<long>(size / 2));
    const int mid_x = static_cast<int>(pw.x0 + static_cast<long>(size / 2));
    const Window cw = patch_window(slice.height, slice.width, mid_y, mid_x, context);
    const Raster ctx = crop_reflect(slice, cw.y0, cw.x0, context, context);
    // Patch centre in context coordinates.
    const double cy = static_cast<double>(pw.y0 - cw.y0) + half;
    const double cx = static_cast<double>(pw.x0 - cw.x0) + half;
    for (std::size_t i = 0; i < size; ++i) {
      const double dy = static_cast<double>(i) - half;
      for (std::size_t j = 0; j < size; ++j) {
        const double dx = static_cast<double>(j) - half;
        const double sx = cx + cos_t * dx - sin_t * dy;
        const double sy = cy + sin_t * dx + cos_t * dy;
        p.data[(i * size + j) * c + k] = bilinear(ctx, sy, sx);
      }
    }
  }
  return p;
}

Patch rotate_patch(const std::map<std::string, Volume>& volumes, const LesionRecord& record, std::size_t size,
                   double angle_deg, const std::vector<std::string>& channels) {
  return rotate_patch(slice_lesion(volumes, record, channels), size, angle_deg);
}

}  // namespace focusclf::data
