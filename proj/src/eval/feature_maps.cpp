#include "focusclf/eval/feature_maps.hpp"

#include <algorithm>
#include <cmath>

#include "focusclf/cnn/train.hpp"
#include "focusclf/data/binary.hpp"
#include "focusclf/data/volume.hpp"

namespace focusclf::eval {

TensorD channel_mean(const TensorF& maps) {
  const std::size_t h = maps.extent(0), w = maps.extent(1), k = maps.extent(2);
  TensorD out({h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += maps[p * k + c];
    out[p] = s / static_cast<double>(k);
  }
  return out;
}

std::array<TensorD, 4> average_feature_maps(const cnn::ModelParamsF& params, const data::Patch& patch) {
  cnn::ForwardCache<float> cache;
  cnn::conv_stack_forward(params, cnn::stack_patches(std::span<const data::Patch>(&patch, 1)), cnn::Mode::Infer, &cache);
  std::array<TensorD, 4> out;
  for (std::size_t l = 0; l < 4; ++l) {
    const auto& a = cache.activation[l];
    out[l] = channel_mean(a.reshaped({a.extent(1), a.extent(2), a.extent(3)}));
  }
  return out;
}

std::vector<std::uint8_t> grayscale_ppm(const TensorD& map) {
  const std::size_t h = map.extent(0), w = map.extent(1);
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
  const double range = *hi - *lo;
  for (double v : map.data()) {
    const auto g = static_cast<std::uint8_t>(range > 0 ? std::lround((v - *lo) / range * 255.0) : 0);
    out.insert(out.end(), {g, g, g});
  }
  return out;
}

std::vector<std::filesystem::path> export_feature_maps(const std::array<TensorD, 4>& maps,
                                                       const std::filesystem::path& directory, const std::string& stem) {
  std::filesystem::create_directories(directory);
  std::vector<std::filesystem::path> written;
  for (std::size_t l = 0; l < 4; ++l) {
    const auto base = directory / (stem + "_C" + std::to_string(l + 1));
    const auto& m = maps[l];
    data::Volume v(1, static_cast<std::uint32_t>(m.extent(0)), static_cast<std::uint32_t>(m.extent(1)));
    for (std::size_t i = 0; i < m.size(); ++i) v.voxels[i] = static_cast<float>(m[i]);
    auto mpv = base;
    mpv += ".mpv";
    data::write_volume(mpv, v);
    auto ppm = base;
    ppm += ".ppm";
    data::write_file_bytes(ppm.string(), grayscale_ppm(m));
    written.push_back(mpv);
    written.push_back(ppm);
  }
  return written;
}

}  // namespace focusclf::eval
