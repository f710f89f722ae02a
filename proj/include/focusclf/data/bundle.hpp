#pragma once

#include <filesystem>
#include <vector>

#include "focusclf/data/patch.hpp"

namespace focusclf::data {

/// Writes one D=1 VolumeFile per patch channel plus a `patches.json` sidecar
/// describing every patch (record, channels, size, provenance, files).
void write_patch_bundle(const std::filesystem::path& directory, const std::vector<Patch>& patches);

std::vector<Patch> read_patch_bundle(const std::filesystem::path& directory);

}  // namespace focusclf::data
