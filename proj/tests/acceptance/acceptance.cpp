// Acceptance runner: one PASS/FAIL line per criterion.
//
//   sonic_acceptance                 all criteria
//   sonic_acceptance --criterion N   criterion N only

#include "sonic/gradients.hpp"
#include "sonic/oracle.hpp"
#include "sonic/serialization.hpp"
#include "sonic/train.hpp"
#include "sonic_cli/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using namespace sonic;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 1;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Outcome from_check(const oracle::OracleCheck& c) {
  return {c.passed, c.name + " value=" + num(c.value) + " tolerance=" + num(c.tolerance) + " " + c.detail};
}

int cli(std::vector<std::string> args, std::string* captured = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (captured) *captured = out.str();
  if (code != cli::kExitOk) std::cerr << err.str();
  return code;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(SONIC_ACCEPTANCE_TMPDIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome convolution_theorem() {
  const auto t0 = Clock::now();
  const auto check = oracle::check_convolution_theorem(kSeed, 50);
  const double t = seconds_since(t0);
  Outcome o = from_check(check);
  o.passed = o.passed && t < 10.0;
  o.detail += " runtime=" + num(t) + "s (limit 10s)";
  return o;
}

Outcome gradient_check_criterion() {
  const auto t0 = Clock::now();
  const auto setup = default_gradcheck_setup(kSeed);
  const auto report = gradient_check(setup.net, setup.batch, setup.objective, 1e-5, 1e-4);
  const double t = seconds_since(t0);
  const int code = cli({"gradcheck", "--seed", std::to_string(kSeed)});
  Outcome o;
  o.passed = report.passed() && t < 60.0 && code == cli::kExitOk;
  o.detail = "max_rel=" + num(report.max_rel) + " (worst " + report.worst().key + ", limit 1e-4) runtime=" + num(t) +
             "s cli_exit=" + std::to_string(code);
  return o;
}

Outcome resolution_invariance() { return from_check(oracle::check_resolution_invariance(kSeed)); }

Outcome s4nd_reduction() {
  const auto a = oracle::check_s4nd_reduction(kSeed);
  const auto b = oracle::check_absorbed_identity(kSeed, 100);
  return {a.passed && b.passed, from_check(a).detail + "; " + from_check(b).detail};
}

Outcome stability_bound() { return from_check(oracle::check_stability_bound(kSeed, 100000)); }

Outcome parameter_count() { return from_check(oracle::check_parameter_count(kSeed, 10)); }

/// Desk-scale settings shared by the training criteria.
NetworkSpec desk_spec() {
  NetworkSpec spec;
  spec.width = 8;
  spec.modes = 8;
  spec.depth = 2;
  spec.options.gain_normalize = false;
  return spec;
}

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.seed = kSeed;
  return cfg;
}

TrainResult desk_train(Architecture arch, TaskKind kind) {
  const ModelFile model = init_model(arch, kind, 32, desk_spec(), kSeed);
  const auto t0 = Clock::now();
  const std::string tag = std::string(to_string(arch)) + "/" + std::string(to_string(kind));
  return train(model, desk_config(), [&](const EpochLog& e) {
    if (e.split == "val" && e.epoch % 20 == 0)
      std::cout << "  " << tag << " epoch " << e.epoch << " val " << num(headline(e.metrics, kind)) << " loss "
                << num(e.metrics.loss) << " (" << num(seconds_since(t0)) << "s)" << std::endl;
  });
}

double final_val_metric(const TrainResult& r, TaskKind kind) {
  for (auto it = r.log.rbegin(); it != r.log.rend(); ++it)
    if (it->split == "val") return headline(it->metrics, kind);
  return 0.0;
}

Outcome halligalli_trend() {
  const auto t0 = Clock::now();
  const TrainResult sonic = desk_train(Architecture::sonic, TaskKind::halligalli);
  const TrainResult conv = desk_train(Architecture::conv, TaskKind::halligalli);
  const double t = seconds_since(t0);
  const double s_final = final_val_metric(sonic, TaskKind::halligalli);
  Outcome o;
  o.passed = !sonic.diverged && s_final >= 0.90 && conv.best_metric <= 0.60 && t < 1800.0;
  o.detail = "sonic final val acc=" + num(s_final) + " (best " + num(sonic.best_metric) + ", need >= 0.90); conv best val acc=" +
             num(conv.best_metric) + " (need <= 0.60); conv width " +
             std::to_string(conv.best.conv.layers.front().out_channels) + "; runtime=" + num(t) + "s (limit 1800s)";
  return o;
}

Outcome synthshape_robustness() {
  const TrainResult r = desk_train(Architecture::sonic, TaskKind::synthshape);
  const auto rows = evaluate_robustness(r.best, 64, kSeed);
  double clean = 0.0, worst_translate_gap = 0.0, noise1 = 0.0, noise3 = 0.0;
  for (const auto& row : rows) {
    std::cout << "  " << row.kind << " " << num(row.level) << " dice " << num(row.metric) << "\n";
    if (row.kind == "clean") clean = row.metric;
    if (row.kind == "translate") worst_translate_gap = std::max(worst_translate_gap, std::abs(clean - row.metric));
    if (row.kind == "noise" && row.level == 0.1) noise1 = row.metric;
    if (row.kind == "noise" && row.level == 0.3) noise3 = row.metric;
  }
  Outcome o;
  o.passed = !r.diverged && r.best_metric >= 0.95 && worst_translate_gap <= 0.10 && noise3 <= noise1;
  o.detail = "best val dice=" + num(r.best_metric) + " at epoch " + std::to_string(r.best_epoch) +
             " (need >= 0.95); held-out clean=" + num(clean) + " max |translate - clean|=" + num(worst_translate_gap) +
             " (need <= 0.10); noise 0.1=" + num(noise1) + " noise 0.3=" + num(noise3) + " (need 0.3 <= 0.1)";
  return o;
}

Outcome complexity_trend() {
  const fs::path dir = scratch("bench");
  const int code = cli({"bench", "--dims", "64,64", "--dims", "128,128", "--repeats", "21", "--warmup", "3", "--seed",
                        std::to_string(kSeed), "--out", dir.string()});
  if (code != cli::kExitOk) return {false, "bench exited with " + std::to_string(code)};
  std::ifstream csv(dir / "bench.csv");
  std::string line;
  std::getline(csv, line);
  std::vector<double> ms;
  while (std::getline(csv, line)) ms.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  if (ms.size() != 2) return {false, "unexpected bench.csv"};
  const double ratio = ms[1] / ms[0];
  return {ratio < 5.0, "median 64x64=" + num(ms[0]) + "ms 128x128=" + num(ms[1]) + "ms ratio=" + num(ratio) +
                           " (need < 5.0)"};
}

Outcome determinism() {
  const fs::path a = scratch("determinism_a"), b = scratch("determinism_b");
  const int c1 = cli({"train", "--task", "synthshape", "--seed", "7", "--epochs", "3", "--train-samples", "64",
                      "--width", "6", "--modes", "4", "--out", a.string()});
  const int c2 = cli({"train", "--config", (a / "manifest.json").string(), "--out", b.string()});
  const fs::path c = scratch("determinism_c"), d = scratch("determinism_d");
  const int c3 = cli({"train", "--task", "halligalli", "--arch", "conv", "--seed", "8", "--epochs", "2",
                      "--train-samples", "32", "--out", c.string()});
  const int c4 = cli({"train", "--config", (c / "manifest.json").string(), "--out", d.string()});
  if (c1 || c2 || c3 || c4) return {false, "a training run failed"};
  std::string detail;
  bool same = true;
  for (const auto& [x, y] : {std::pair{a, b}, std::pair{c, d}}) {
    for (const char* f : {"model.json", "last_model.json", "optimizer.json", "metrics.csv"}) {
      const bool eq = read_text_file(x / f) == read_text_file(y / f);
      same = same && eq;
      if (!eq) detail += std::string(f) + " differs; ";
    }
  }
  const auto ma = nlohmann::json::parse(read_text_file(a / "manifest.json"));
  const auto mb = nlohmann::json::parse(read_text_file(b / "manifest.json"));
  same = same && ma["config"] == mb["config"] && ma["hashes"] == mb["hashes"];
  return {same, detail.empty() ? "model, optimizer and metrics files bitwise identical for sonic and conv reruns"
                               : detail};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "convolution_theorem", convolution_theorem},
      {2, "gradient_check", gradient_check_criterion},
      {3, "resolution_invariance", resolution_invariance},
      {4, "s4nd_reduction", s4nd_reduction},
      {5, "stability_bound", stability_bound},
      {6, "parameter_count", parameter_count},
      {7, "halligalli_trend", halligalli_trend},
      {8, "synthshape_robustness", synthshape_robustness},
      {9, "complexity_trend", complexity_trend},
      {10, "determinism", determinism},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: sonic_acceptance [--criterion N]\n";
      return 1;
    }
  }
  if (only < 0 || only > static_cast<int>(criteria().size())) {
    std::cerr << "criterion must lie in 1.." << criteria().size() << "\n";
    return 1;
  }
  bool all = true;
  for (const auto& c : criteria()) {
    if (only && c.number != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << " " << c.number << " " << c.name << ": " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
