#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace focusclf::data {

/// Scalar volume, z-major then row-major: index = (z·H + y)·W + x.
struct Volume {
  std::uint32_t depth = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> voxels;

  Volume() = default;
  Volume(std::uint32_t d, std::uint32_t h, std::uint32_t w, float fill = 0.0f)
      : depth(d), height(h), width(w), voxels(static_cast<std::size_t>(d) * h * w, fill) {}

  std::size_t size() const { return voxels.size(); }
  float& at(std::size_t z, std::size_t y, std::size_t x) { return voxels[(z * height + y) * width + x]; }
  float at(std::size_t z, std::size_t y, std::size_t x) const { return voxels[(z * height + y) * width + x]; }

  friend bool operator==(const Volume&, const Volume&) = default;
};

// "MPV1" file: magic, then D, H, W as u32 little-endian, then D·H·W float32 LE.
std::vector<std::uint8_t> encode_volume(const Volume& volume);
Volume decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

Volume read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume& volume);

}  // namespace focusclf::data
