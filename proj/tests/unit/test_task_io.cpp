#include "sonic/task_io.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>

namespace sonic {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(SONIC_TEST_TMPDIR) / "task_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

TEST(Dataset, RoundTripPreservesSamples) {
  std::vector<TaskSample> samples{gen_synthshape(1, 16), gen_synthshape(2, 16)};
  const fs::path path = scratch("synth.bin");
  write_dataset(path, samples);
  const auto back = read_dataset(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].seed, samples[i].seed);
    EXPECT_EQ(back[i].mask, samples[i].mask);
    EXPECT_EQ(back[i].label, -1);
    EXPECT_EQ(back[i].kind, TaskKind::synthshape);
    ASSERT_EQ(back[i].image.data.size(), samples[i].image.data.size());
    for (std::size_t j = 0; j < back[i].image.data.size(); ++j)
      EXPECT_EQ(back[i].image.data[j], static_cast<double>(static_cast<float>(samples[i].image.data[j])));
  }
}

TEST(Dataset, HalliGalliLabelsSurvive) {
  std::vector<TaskSample> samples{gen_halligalli(3, 32), gen_halligalli(4, 32)};
  const fs::path path = scratch("halli.bin");
  write_dataset(path, samples);
  const auto back = read_dataset(path);
  EXPECT_EQ(back[0].label, samples[0].label);
  EXPECT_EQ(back[1].label, samples[1].label);
  EXPECT_EQ(back[1].kind, TaskKind::halligalli);
}

TEST(Dataset, HeaderLayout) {
  std::vector<TaskSample> samples{gen_synthshape(5, 16)};
  const fs::path path = scratch("header.bin");
  write_dataset(path, samples);
  const std::string bytes = slurp(path);
  EXPECT_EQ(bytes.substr(0, 8), "SONICTS1");
  EXPECT_EQ(bytes.size(), 8 + 6 * 4 + 8 + 4 + 3 * 256 * 4 + 256u);
}

TEST(Dataset, RejectsMixedShapesAndBadFiles) {
  std::vector<TaskSample> mixed{gen_synthshape(1, 16), gen_synthshape(2, 20)};
  EXPECT_THROW(write_dataset(scratch("mixed.bin"), mixed), std::invalid_argument);
  EXPECT_THROW(write_dataset(scratch("empty.bin"), std::vector<TaskSample>{}), std::invalid_argument);
  std::ofstream(scratch("junk.bin")) << "not a dataset";
  EXPECT_THROW(read_dataset(scratch("junk.bin")), std::runtime_error);
  std::vector<TaskSample> one{gen_synthshape(1, 16)};
  write_dataset(scratch("trunc.bin"), one);
  fs::resize_file(scratch("trunc.bin"), 100);
  EXPECT_THROW(read_dataset(scratch("trunc.bin")), std::runtime_error);
}

TEST(Dataset, ManifestListsSeedsAndShape) {
  std::vector<TaskSample> samples{gen_halligalli(7, 32), gen_halligalli(8, 32)};
  const auto j = nlohmann::json::parse(dataset_manifest_json(samples, "data.bin"));
  EXPECT_EQ(j["format"], "sonic-dataset");
  EXPECT_EQ(j["kind"], "halligalli");
  EXPECT_EQ(j["count"], 2);
  EXPECT_EQ(j["height"], 32);
  EXPECT_EQ(j["seeds"][1], 8);
  EXPECT_EQ(j["labels"][0], samples[0].label);
}

TEST(ImageExport, PngSignatureAndPgmHeader) {
  const TaskSample s = gen_synthshape(9, 16);
  write_png(scratch("img.png"), s.image);
  EXPECT_EQ(slurp(scratch("img.png")).substr(1, 3), "PNG");
  write_pgm(scratch("mask.pgm"), s.mask, 16, 16, 5);
  const std::string pgm = slurp(scratch("mask.pgm"));
  EXPECT_EQ(pgm.substr(0, 13), "P5\n16 16\n255\n");
  EXPECT_EQ(pgm.size(), 13 + 256u);
  EXPECT_THROW(write_pgm(scratch("bad.pgm"), s.mask, 15, 16, 5), std::invalid_argument);
}

TEST(ImageExport, FieldIsScaledByItsMaximum) {
  const std::vector<double> field{0.0, 1.0, 2.0, 4.0};
  write_pgm_field(scratch("field.pgm"), field, 2, 2);
  const std::string pgm = slurp(scratch("field.pgm"));
  const std::string body = pgm.substr(pgm.size() - 4);
  EXPECT_EQ(static_cast<unsigned char>(body[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(body[2]), 128);
  EXPECT_EQ(static_cast<unsigned char>(body[3]), 255);
}

}  // namespace
}  // namespace sonic
