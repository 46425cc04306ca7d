#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sonic::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitVerification = 2;

/// Record of one artifact-producing run. Written with status "running" before
/// the work starts and rewritten with outputs, hashes and the end time after.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config;  ///< fully resolved settings
  std::uint64_t seed = 0;
  std::string version;
  std::map<std::string, std::string> outputs;  ///< artifact name -> path relative to the manifest
  std::map<std::string, std::string> hashes;   ///< artifact name -> FNV-1a 64 of its bytes
  std::string started;
  std::string finished;
  std::string status = "running";

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::ordered_json& j);
};

inline constexpr std::string_view kManifestName = "manifest.json";

/// Throws std::runtime_error when the manifest beside `model` is missing, does
/// not list the file, or records a different hash.
void verify_model_against_manifest(const std::filesystem::path& model);

/// Runs one subcommand. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sonic::cli
