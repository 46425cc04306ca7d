#include "sonic/task_io.hpp"

#include "sonic/serialization.hpp"

#include <png.h>

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace sonic {
namespace {

static_assert(std::endian::native == std::endian::little, "dataset files are written in host order");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("dataset file is truncated");
  return v;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_pgm_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, std::size_t height,
                     std::size_t width) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(bytes.begin(), bytes.end());
  write_text_file(path, out);
}

}  // namespace

void write_dataset(const std::filesystem::path& path, std::span<const TaskSample> samples) {
  if (samples.empty()) throw std::invalid_argument("write_dataset: no samples");
  const auto& first = samples.front();
  const std::size_t C = first.image.channels, H = first.height(), W = first.width();
  for (const auto& s : samples) {
    if (s.kind != first.kind || s.image.channels != C || s.height() != H || s.width() != W || s.mask.size() != H * W)
      throw std::invalid_argument("write_dataset: samples differ in kind or shape");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kDatasetMagic, sizeof(kDatasetMagic));
  put<std::uint32_t>(os, kDatasetVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(first.kind));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(samples.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(C));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(H));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(W));
  for (const auto& s : samples) {
    put<std::uint64_t>(os, s.seed);
    put<std::int32_t>(os, s.label);
    for (double v : s.image.data) put<float>(os, static_cast<float>(v));
    for (int m : s.mask) put<std::uint8_t>(os, static_cast<std::uint8_t>(m));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<TaskSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[sizeof(kDatasetMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + " is not a dataset file");
  if (get<std::uint32_t>(is) != kDatasetVersion) throw std::runtime_error("unsupported dataset version");
  const auto kind = get<std::uint32_t>(is);
  if (kind > static_cast<std::uint32_t>(TaskKind::halligalli)) throw std::runtime_error("unknown task kind in dataset");
  const auto count = get<std::uint32_t>(is), C = get<std::uint32_t>(is), H = get<std::uint32_t>(is),
             W = get<std::uint32_t>(is);
  if (C == 0 || H == 0 || W == 0) throw std::runtime_error("dataset has an empty sample shape");
  const GridPtr grid = image_grid(H, W);
  std::vector<TaskSample> out(count);
  for (auto& s : out) {
    s.kind = static_cast<TaskKind>(kind);
    s.seed = get<std::uint64_t>(is);
    s.label = get<std::int32_t>(is);
    s.image = Signal(C, grid);
    for (double& v : s.image.data) v = get<float>(is);
    s.mask.resize(static_cast<std::size_t>(H) * W);
    for (int& m : s.mask) m = get<std::uint8_t>(is);
  }
  return out;
}

std::string dataset_manifest_json(std::span<const TaskSample> samples, const std::string& data_file) {
  nlohmann::ordered_json j;
  j["format"] = "sonic-dataset";
  j["version"] = kDatasetVersion;
  j["data_file"] = data_file;
  j["kind"] = samples.empty() ? "" : std::string(to_string(samples.front().kind));
  j["count"] = samples.size();
  j["channels"] = samples.empty() ? 0 : samples.front().image.channels;
  j["height"] = samples.empty() ? 0 : samples.front().height();
  j["width"] = samples.empty() ? 0 : samples.front().width();
  auto seeds = nlohmann::ordered_json::array();
  auto labels = nlohmann::ordered_json::array();
  for (const auto& s : samples) {
    seeds.push_back(s.seed);
    labels.push_back(s.label);
  }
  j["seeds"] = seeds;
  j["labels"] = labels;
  return j.dump(2) + "\n";
}

void write_png(const std::filesystem::path& path, const Signal& image) {
  if (!image.grid || image.grid->rank() != 2 || image.channels != 3)
    throw std::invalid_argument("write_png: expected a 3-channel 2-D image");
  const std::size_t H = image.grid->dims()[0], W = image.grid->dims()[1], N = H * W;
  std::vector<std::uint8_t> rgb(3 * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = to_byte(image.data[c * N + i]);

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < H; ++r) png_write_row(png, rgb.data() + 3 * r * W);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pgm(const std::filesystem::path& path, std::span<const int> mask, std::size_t height, std::size_t width,
               int max_value) {
  if (mask.size() != height * width) throw std::invalid_argument("write_pgm: mask size does not match shape");
  const double scale = max_value > 0 ? 255.0 / max_value : 0.0;
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(mask[i] * scale, 0.0, 255.0)));
  write_pgm_bytes(path, bytes, height, width);
}

void write_pgm_field(const std::filesystem::path& path, std::span<const double> field, std::size_t height,
                     std::size_t width) {
  if (field.size() != height * width) throw std::invalid_argument("write_pgm_field: field size does not match shape");
  double hi = 0.0;
  for (double v : field) hi = std::max(hi, v);
  std::vector<std::uint8_t> bytes(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) bytes[i] = hi > 0.0 ? to_byte(field[i] / hi) : 0;
  write_pgm_bytes(path, bytes, height, width);
}

}  // namespace sonic
