#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace focusclf::cli {

/// Parses argv, runs one subcommand and returns the process exit code
/// (0 success, 1 input/usage error, 2 numeric or internal error).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Records what a subcommand produced, with the config fingerprint, in
/// `<dir>/run_manifest.json`.
void write_run_manifest(const std::filesystem::path& directory, const std::string& command, const nlohmann::json& config,
                        const std::vector<std::filesystem::path>& artifacts);

/// Default for --jobs: FOCUSCLF_JOBS when set to a positive integer, else 1.
std::size_t default_jobs();

}  // namespace focusclf::cli
