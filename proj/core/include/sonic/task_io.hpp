#pragma once

#include "sonic/tasks.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sonic {

/// Little-endian flat dataset file:
///   "SONICTS1", u32 version, u32 kind, u32 count, u32 channels, u32 height, u32 width,
///   then per sample: u64 seed, i32 label, f32 image[channels*H*W], u8 mask[H*W].
inline constexpr char kDatasetMagic[8] = {'S', 'O', 'N', 'I', 'C', 'T', 'S', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

/// Throws std::invalid_argument when samples differ in kind or shape.
void write_dataset(const std::filesystem::path& path, std::span<const TaskSample> samples);

/// Throws std::runtime_error on a malformed or truncated file. Shape records
/// are not stored and come back empty.
std::vector<TaskSample> read_dataset(const std::filesystem::path& path);

/// JSON sidecar describing a dataset file: kind, size, count, seeds.
std::string dataset_manifest_json(std::span<const TaskSample> samples, const std::string& data_file);

/// 8-bit RGB PNG of an image in [0, 1] (values are clamped).
void write_png(const std::filesystem::path& path, const Signal& image);

/// Binary PGM (P5) of a class-id mask scaled so that max_value maps to 255.
void write_pgm(const std::filesystem::path& path, std::span<const int> mask, std::size_t height, std::size_t width,
               int max_value);

/// Binary PGM of a real field linearly mapped from [0, max] to [0, 255].
void write_pgm_field(const std::filesystem::path& path, std::span<const double> field, std::size_t height,
                     std::size_t width);

}  // namespace sonic
