#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace nsr::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // as given after the command name
  nlohmann::json config;          // resolved values
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::string started;
  std::string finished;
  std::string tool_version = kToolVersion;
};

/// ISO 8601 UTC.
std::string utc_now();

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
/// Throws DataFileMissing, ParseError.
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace nsr::cli
