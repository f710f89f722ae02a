#include "focusclf/data/bundle.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "focusclf/data/volume.hpp"
#include "focusclf/errors.hpp"

namespace focusclf::data {

using nlohmann::json;

namespace {

std::string file_name(std::size_t index, std::size_t channel) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "patch_%06zu_c%zu.mpv", index, channel);
  return buf;
}

}  // namespace

void write_patch_bundle(const std::filesystem::path& directory, const std::vector<Patch>& patches) {
  std::filesystem::create_directories(directory);
  json entries = json::array();
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Patch& p = patches[i];
    const std::size_t c = p.channels.size();
    json files = json::array();
    for (std::size_t k = 0; k < c; ++k) {
      Volume raster(1, static_cast<std::uint32_t>(p.size), static_cast<std::uint32_t>(p.size));
      for (std::size_t j = 0; j < p.size * p.size; ++j) raster.voxels[j] = p.data[j * c + k];
      const std::string name = file_name(i, k);
      write_volume(directory / name, raster);
      files.push_back(name);
    }
    entries.push_back({{"record", json::parse(format_record(p.record))},
                       {"channels", p.channels},
                       {"size", p.size},
                       {"provenance", {{"kind", p.provenance.rotated ? "rotated" : "original"}, {"angle", p.provenance.angle_deg}}},
                       {"files", files}});
  }
  std::ofstream out(directory / "patches.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (directory / "patches.json").string());
  out << json{{"format", "focusclf-patch-bundle"}, {"version", 1}, {"patches", entries}}.dump(1) << '\n';
}

std::vector<Patch> read_patch_bundle(const std::filesystem::path& directory) {
  std::ifstream in(directory / "patches.json");
  if (!in) throw IoError("cannot open " + (directory / "patches.json").string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("patch bundle sidecar: ") + e.what());
  }
  std::vector<Patch> patches;
  try {
    for (const auto& e : doc.at("patches")) {
      Patch p;
      p.record = parse_record(e.at("record").dump());
      p.channels = e.at("channels").get<std::vector<std::string>>();
      p.size = e.at("size").get<std::size_t>();
      p.provenance.rotated = e.at("provenance").at("kind").get<std::string>() == "rotated";
      p.provenance.angle_deg = e.at("provenance").at("angle").get<double>();
      const auto files = e.at("files").get<std::vector<std::string>>();
      const std::size_t c = p.channels.size();
      if (files.size() != c) throw FormatError("patch bundle: file count does not match channel count");
      p.data = TensorF({p.size, p.size, c});
      for (std::size_t k = 0; k < c; ++k) {
        const Volume raster = read_volume(directory / files[k]);
        if (raster.depth != 1 || raster.height != p.size || raster.width != p.size) {
          throw FormatError("patch bundle: " + files[k] + " has unexpected extents");
        }
        for (std::size_t j = 0; j < p.size * p.size; ++j) p.data[j * c + k] = raster.voxels[j];
      }
      patches.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("patch bundle sidecar: ") + e.what());
  }
  return patches;
}

}  // namespace focusclf::data
