#pragma once

#include "sonic/conv_baseline.hpp"
#include "sonic/operator.hpp"
#include "sonic/optimizer.hpp"
#include "sonic/tasks.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sonic {

enum class Architecture { sonic, conv };

std::string_view to_string(Architecture a) noexcept;
Architecture parse_architecture(std::string_view name);

/// A trained model together with everything needed to run it on raw task images.
struct ModelFile {
  Architecture arch = Architecture::sonic;
  SonicNetwork sonic;
  ConvNet conv;
  TaskKind task = TaskKind::synthshape;
  std::size_t image_size = 32;
  ChannelStats input_stats;
  std::size_t center_patch = 4;  ///< classification readout window
};

/// Reals are written with 17 significant digits, so a save/load round trip is
/// bit-exact. Key order is fixed and no timestamps are written, so equal models
/// produce byte-identical files.
std::string network_to_json(const SonicNetwork& net);
/// Throws std::invalid_argument on malformed input and ConfigError on
/// inconsistent shapes.
SonicNetwork network_from_json(std::string_view text);

std::string model_to_json(const ModelFile& model);
ModelFile model_from_json(std::string_view text);

std::string optimizer_to_json(const AdamW& opt);
AdamW optimizer_from_json(std::string_view text);

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// 64-bit FNV-1a, printed as 16 hex digits by hash_hex.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hash_hex(std::uint64_t h);

/// "%.17g".
std::string format_real(double v);

}  // namespace sonic
