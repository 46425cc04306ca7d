#include "sonic/serialization.hpp"
#include "sonic_cli/cli.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace sonic::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(SONIC_TEST_TMPDIR) / "cli" / name;
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

nlohmann::json manifest_of(const fs::path& dir) { return nlohmann::json::parse(read_text_file(dir / "manifest.json")); }

const std::vector<std::string> kTinyTrain{"--task", "synthshape", "--size", "16", "--width", "3", "--modes", "2",
                                          "--depth", "1", "--epochs", "2", "--batch", "4", "--train-samples", "8",
                                          "--val-samples", "4", "--seed", "5"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(invoke({}).code, kExitValidation);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(invoke({"verify", "--bogus", "1"}).code, kExitValidation);
  EXPECT_EQ(invoke({"gen", "--seed", "-3", "--out", scratch("neg").string()}).code, kExitValidation);
  EXPECT_EQ(invoke({"gen", "--size", "abc", "--out", scratch("abc").string()}).code, kExitValidation);
  EXPECT_EQ(invoke({"gen", "--task", "mnist", "--out", scratch("mnist").string()}).code, kExitValidation);
  EXPECT_EQ(invoke({"train", "--lr", "-1", "--out", scratch("lr").string()}).code, kExitValidation);
}

TEST(Cli, HelpExitsZero) {
  const Result r = invoke({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("gradcheck"), std::string::npos);
  EXPECT_EQ(invoke({"train", "--help"}).code, kExitOk);
}

TEST(Cli, VerifyPassesAndWritesManifest) {
  const fs::path dir = scratch("verify");
  const Result r = invoke({"verify", "--seed", "3", "--out", dir.string()});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(lines_of(dir / "verify.csv").size(), 12u);
  const auto m = manifest_of(dir);
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["command"], "verify");
  EXPECT_EQ(m["outputs"]["verify"], "verify.csv");
}

TEST(Cli, GradcheckPasses) {
  const Result r = invoke({"gradcheck", "--seed", "2"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("PASS max relative error"), std::string::npos);
}

TEST(Cli, GradcheckFailureExitsTwo) {
  EXPECT_EQ(invoke({"gradcheck", "--threshold", "1e-30"}).code, kExitVerification);
}

TEST(Cli, GenWritesDatasetImagesAndManifest) {
  const fs::path dir = scratch("gen");
  const Result r = invoke({"gen", "--task", "halligalli", "--count", "3", "--png", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "data.bin"));
  EXPECT_TRUE(fs::exists(dir / "images" / "sample_0002.png"));
  EXPECT_TRUE(fs::exists(dir / "images" / "sample_0000_mask.pgm"));
  const auto m = manifest_of(dir);
  EXPECT_EQ(m["config"]["count"], 3);
  EXPECT_EQ(m["hashes"]["data"], hash_hex(fnv1a64(read_text_file(dir / "data.bin"))));
  const auto index = nlohmann::json::parse(read_text_file(dir / "data.json"));
  EXPECT_EQ(index["count"], 3);
}

TEST(Cli, TrainEvalAndTamperRefusal) {
  const fs::path dir = scratch("train");
  const Result t = invoke(with({"train", "--out", dir.string()}, kTinyTrain));
  ASSERT_EQ(t.code, kExitOk) << t.err;
  for (const char* f : {"model.json", "last_model.json", "optimizer.json", "metrics.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(lines_of(dir / "metrics.csv").size(), 1 + 2 * 2u);

  const fs::path eval_dir = scratch("eval");
  const Result e = invoke({"eval", "--model", (dir / "model.json").string(), "--samples", "2", "--out", eval_dir.string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(lines_of(eval_dir / "robustness.csv").size(), 17u);

  {
    std::ofstream os(dir / "model.json", std::ios::app);
    os << " ";
  }
  const Result bad = invoke({"eval", "--model", (dir / "model.json").string(), "--samples", "2"});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("does not match"), std::string::npos);
}

TEST(Cli, ConfigPrecedenceAndManifestReuse) {
  const fs::path dir = scratch("precedence");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "cfg.json");
    os << R"({"count": 2, "size": 20, "task": "synthshape", "epochs": 7})";
  }
  const fs::path a = dir / "a";
  ASSERT_EQ(invoke({"gen", "--config", (dir / "cfg.json").string(), "--size", "24", "--out", a.string()}).code, kExitOk);
  const auto m = manifest_of(a);
  EXPECT_EQ(m["config"]["count"], 2);
  EXPECT_EQ(m["config"]["size"], 24);
  EXPECT_FALSE(m["config"].contains("out"));
  EXPECT_FALSE(m["config"].contains("epochs"));

  const fs::path b = dir / "b";
  ASSERT_EQ(invoke({"gen", "--config", (a / "manifest.json").string(), "--out", b.string()}).code, kExitOk);
  EXPECT_EQ(read_text_file(a / "data.bin"), read_text_file(b / "data.bin"));

  {
    std::ofstream os(dir / "bad.json");
    os << R"({"cuont": 2})";
  }
  EXPECT_EQ(invoke({"gen", "--config", (dir / "bad.json").string(), "--out", (dir / "c").string()}).code,
            kExitValidation);
}

TEST(Cli, ResampleSharesRawSymbolAcrossResolutions) {
  const fs::path dir = scratch("resample_model");
  ASSERT_EQ(invoke(with({"train", "--out", dir.string(), "--epochs", "1"}, kTinyTrain)).code, kExitOk);
  const fs::path out = scratch("resample");
  const Result r = invoke({"resample", "--model", (dir / "model.json").string(), "--dims", "8,8", "--dims", "16,16",
                           "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto coarse = lines_of(out / "symbol_8x8.csv"), fine = lines_of(out / "symbol_16x16.csv");
  EXPECT_EQ(coarse.front(), "block,k,c,omega_0,omega_1,re,im");
  std::set<std::string> fine_rows(fine.begin(), fine.end());
  for (std::size_t i = 1; i < coarse.size(); ++i) EXPECT_TRUE(fine_rows.count(coarse[i])) << coarse[i];
  EXPECT_TRUE(fs::exists(out / "gains_16x16.csv"));
}

TEST(Cli, ExportSpectrumAndBench) {
  const fs::path dir = scratch("spectrum_model");
  ASSERT_EQ(invoke(with({"train", "--out", dir.string(), "--epochs", "1"}, kTinyTrain)).code, kExitOk);
  const fs::path out = scratch("spectrum");
  ASSERT_EQ(invoke({"export-spectrum", "--model", (dir / "model.json").string(), "--size", "16", "--out", out.string()})
                .code,
            kExitOk);
  EXPECT_TRUE(fs::exists(out / "spectrum_stage0.pgm"));
  EXPECT_EQ(lines_of(out / "spectrum_stage0.csv").size(), 1 + 256u);

  const Result b = invoke({"bench", "--dims", "8,8", "--dims", "16,16", "--repeats", "3", "--warmup", "1"});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_NE(b.out.find("height,width,points,median_ms"), std::string::npos);
  EXPECT_NE(b.out.find("ratio 16x16/8x8 = "), std::string::npos);
}

TEST(Cli, ManifestRoundTrip) {
  RunManifest m;
  m.command = "train";
  m.config = {{"seed", 1}};
  m.seed = 1;
  m.version = "x";
  m.outputs = {{"model", "model.json"}};
  m.hashes = {{"model", "00"}};
  m.status = "ok";
  const RunManifest back = RunManifest::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_THROW(RunManifest::from_json(nlohmann::ordered_json::object()), std::invalid_argument);
}

}  // namespace
}  // namespace sonic::cli
