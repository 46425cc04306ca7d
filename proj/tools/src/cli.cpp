#include "sonic_cli/cli.hpp"

#include "sonic/errors.hpp"
#include "sonic/gradients.hpp"
#include "sonic/operator.hpp"
#include "sonic/oracle.hpp"
#include "sonic/rng.hpp"
#include "sonic/serialization.hpp"
#include "sonic/task_io.hpp"
#include "sonic/tasks.hpp"
#include "sonic/train.hpp"
#include "sonic/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sonic::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Raised when a check runs to completion and reports failure.
class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FlagType { u64, count, real, text, dims, reals, boolean };

struct FlagSpec {
  std::string_view name;
  FlagType type;
  std::string_view help;
};

constexpr FlagSpec kFlags[] = {
    {"seed", FlagType::u64, "master seed"},
    {"size", FlagType::count, "image side length"},
    {"dims", FlagType::dims, "grid extents h,w (repeatable)"},
    {"spacing", FlagType::reals, "grid spacings dh,dw"},
    {"modes", FlagType::count, "modes per block (M)"},
    {"channels", FlagType::count, "input channels of the benchmarked block (C)"},
    {"width", FlagType::count, "output channels per block (K)"},
    {"depth", FlagType::count, "number of blocks"},
    {"epochs", FlagType::count, "training epochs"},
    {"lr", FlagType::real, "peak learning rate"},
    {"wd", FlagType::real, "decoupled weight decay"},
    {"task", FlagType::text, "synthshape or halligalli"},
    {"out", FlagType::text, "output directory"},
    {"model", FlagType::text, "model file"},
    {"config", FlagType::text, "JSON settings file or run manifest"},
    {"arch", FlagType::text, "sonic or conv"},
    {"batch", FlagType::count, "batch size"},
    {"train-samples", FlagType::count, "training samples"},
    {"val-samples", FlagType::count, "validation samples (0: a quarter of the training samples)"},
    {"count", FlagType::count, "samples to generate"},
    {"samples", FlagType::count, "held-out samples per evaluation row"},
    {"dropout", FlagType::real, "mode dropout probability"},
    {"gain-normalize", FlagType::boolean, "RMS-normalize each block's symbol per output channel"},
    {"combined", FlagType::boolean, "also evaluate the combined perturbation tiers"},
    {"png", FlagType::boolean, "export PNG images and PGM masks"},
    {"repeats", FlagType::count, "timed iterations"},
    {"warmup", FlagType::count, "untimed warm-up iterations"},
    {"threshold", FlagType::real, "maximum relative gradient error"},
    {"step", FlagType::real, "finite-difference step"},
};

const FlagSpec& flag_spec(std::string_view name) {
  for (const auto& f : kFlags)
    if (f.name == name) return f;
  throw std::logic_error("unknown flag " + std::string(name));
}

std::string config_key(std::string_view flag) {
  std::string key(flag);
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

json default_value(std::string_view flag) {
  static const json defaults = {
      {"seed", 0},
      {"size", 32},
      {"dims", json::array()},
      {"spacing", json::array({1.0, 1.0})},
      {"modes", 8},
      {"channels", 8},
      {"width", 8},
      {"depth", 2},
      {"epochs", 200},
      {"lr", 1e-2},
      {"wd", 1e-4},
      {"task", "synthshape"},
      {"model", ""},
      {"arch", "sonic"},
      {"batch", 32},
      {"train_samples", 512},
      {"val_samples", 0},
      {"count", 16},
      {"samples", 64},
      {"dropout", 0.0},
      {"gain_normalize", false},
      {"combined", false},
      {"png", false},
      {"repeats", 20},
      {"warmup", 3},
      {"threshold", 1e-4},
      {"step", 1e-5},
  };
  return defaults.at(config_key(flag));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

std::uint64_t parse_u64(const std::string& s, std::string_view flag) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (s.empty() || s.front() == '-' || s.front() == '+') throw std::invalid_argument("sign");
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw ConfigError("--" + std::string(flag) + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s, std::string_view flag) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw ConfigError("--" + std::string(flag) + ": expected a finite number, got '" + s + "'");
  return v;
}

json parse_dims(const std::string& s, std::string_view flag) {
  json dims = json::array();
  for (const auto& part : split(s, ',')) {
    const auto v = parse_u64(part, flag);
    if (v == 0) throw ConfigError("--" + std::string(flag) + ": extents must be positive");
    dims.push_back(v);
  }
  if (dims.empty()) throw ConfigError("--" + std::string(flag) + ": empty extent list");
  return dims;
}

/// Type-checks one settings value from a config file or the defaults.
void check_value(const json& v, const FlagSpec& f) {
  const std::string where = "config key '" + config_key(f.name) + "'";
  auto is_count = [](const json& x) { return x.is_number_unsigned() || (x.is_number_integer() && x.get<std::int64_t>() >= 0); };
  switch (f.type) {
    case FlagType::u64:
    case FlagType::count:
      if (!is_count(v)) throw ConfigError(where + " must be a non-negative integer");
      return;
    case FlagType::real:
      if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError(where + " must be a finite number");
      return;
    case FlagType::text:
      if (!v.is_string()) throw ConfigError(where + " must be a string");
      return;
    case FlagType::boolean:
      if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
      return;
    case FlagType::reals:
      if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
      for (const auto& x : v)
        if (!x.is_number() || !std::isfinite(x.get<double>())) throw ConfigError(where + " must hold finite numbers");
      return;
    case FlagType::dims:
      if (!v.is_array()) throw ConfigError(where + " must be an array of extent lists");
      for (const auto& d : v) {
        if (!d.is_array() || d.empty()) throw ConfigError(where + " must hold non-empty extent lists");
        for (const auto& x : d)
          if (!is_count(x) || x.get<std::uint64_t>() == 0) throw ConfigError(where + " extents must be positive");
      }
      return;
  }
}

json load_config_file(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path.string() + ": expected a JSON object");
  if (j.value("format", "") == "sonic-manifest") {
    if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("manifest has no config object");
    return j["config"];
  }
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_hash(const fs::path& path) { return hash_hex(fnv1a64(read_text_file(path))); }

/// Resolved settings of one command: defaults < config file < flags.
class Settings {
 public:
  json values = json::object();

  std::uint64_t u64(std::string_view flag) const { return values.at(config_key(flag)).get<std::uint64_t>(); }
  std::size_t count(std::string_view flag) const { return static_cast<std::size_t>(u64(flag)); }
  std::size_t positive(std::string_view flag) const {
    const auto v = count(flag);
    if (v == 0) throw ConfigError("--" + std::string(flag) + " must be positive");
    return v;
  }
  double real(std::string_view flag) const { return values.at(config_key(flag)).get<double>(); }
  std::string text(std::string_view flag) const { return values.at(config_key(flag)).get<std::string>(); }
  bool flag(std::string_view name) const { return values.at(config_key(name)).get<bool>(); }
  std::string required_text(std::string_view flag) const {
    auto v = text(flag);
    if (v.empty()) throw ConfigError("--" + std::string(flag) + " is required");
    return v;
  }
  std::vector<double> reals(std::string_view flag) const {
    return values.at(config_key(flag)).get<std::vector<double>>();
  }
  std::vector<std::vector<std::size_t>> dims(std::string_view flag) const {
    return values.at(config_key(flag)).get<std::vector<std::vector<std::size_t>>>();
  }
};

/// Keeps the manifest on disk in step with the run.
class ManifestWriter {
 public:
  ManifestWriter(const fs::path& dir, std::string command, const Settings& settings) : dir_(dir) {
    fs::create_directories(dir_);
    manifest_.command = std::move(command);
    manifest_.config = settings.values;
    manifest_.seed = settings.values.contains("seed") ? settings.u64("seed") : 0;
    manifest_.version = kVersion;
    manifest_.started = utc_now();
    write();
  }

  fs::path path(std::string_view file) const { return dir_ / file; }

  void add(const std::string& name, const fs::path& file) {
    manifest_.outputs[name] = fs::relative(file, dir_).generic_string();
    manifest_.hashes[name] = file_hash(file);
  }

  void finish(std::string status) {
    manifest_.status = std::move(status);
    manifest_.finished = utc_now();
    write();
  }

 private:
  void write() const { write_text_file(dir_ / kManifestName, manifest_.to_json().dump(2) + "\n"); }

  fs::path dir_;
  RunManifest manifest_;
};

std::string type_label(FlagType t) {
  switch (t) {
    case FlagType::u64:
    case FlagType::count: return "UINT";
    case FlagType::real: return "REAL";
    case FlagType::text: return "TEXT";
    case FlagType::dims: return "H,W";
    case FlagType::reals: return "REAL,...";
    case FlagType::boolean: return "";
  }
  return "TEXT";
}

GridPtr grid_of(const std::vector<std::size_t>& dims, const std::vector<double>& spacing) {
  if (spacing.size() != dims.size())
    throw ConfigError("--spacing needs one value per grid axis (" + std::to_string(dims.size()) + ")");
  for (double d : spacing)
    if (!(d > 0.0)) throw ConfigError("--spacing values must be positive");
  return make_grid(dims, spacing);
}

std::string dims_label(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s;
}

std::optional<ManifestWriter> maybe_manifest(const Settings& s, std::string_view out, const std::string& command) {
  if (out.empty()) return std::nullopt;
  return std::optional<ManifestWriter>(std::in_place, fs::path(out), command, s);
}

// ---------------------------------------------------------------------------

int cmd_gen(const Settings& s, const std::string& out_dir, std::ostream& out) {
  const TaskKind kind = parse_task_kind(s.text("task"));
  const std::size_t size = s.positive("size"), n = s.positive("count");
  if (out_dir.empty()) throw ConfigError("--out is required");
  const std::uint64_t base = seed_splits(s.u64("seed"), n, 0).train;
  std::vector<TaskSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) samples.push_back(generate_sample(kind, base + i, size));

  ManifestWriter manifest(out_dir, "gen", s);
  write_dataset(manifest.path("data.bin"), samples);
  manifest.add("data", manifest.path("data.bin"));
  write_text_file(manifest.path("data.json"), dataset_manifest_json(samples, "data.bin"));
  manifest.add("index", manifest.path("data.json"));
  if (s.flag("png")) {
    const int max_id = kind == TaskKind::synthshape ? kStar : kTriangle;
    fs::create_directories(manifest.path("images"));
    for (std::size_t i = 0; i < n; ++i) {
      std::ostringstream stem;
      stem << "images/sample_" << std::setw(4) << std::setfill('0') << i;
      write_png(manifest.path(stem.str() + ".png"), samples[i].image);
      write_pgm(manifest.path(stem.str() + "_mask.pgm"), samples[i].mask, size, size, max_id);
    }
  }
  manifest.finish("ok");
  out << "wrote " << n << " " << to_string(kind) << " samples of " << size << "x" << size << " to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const Settings& s, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  const TaskKind kind = parse_task_kind(s.text("task"));
  const Architecture arch = parse_architecture(s.text("arch"));
  NetworkSpec spec;
  spec.width = s.positive("width");
  spec.depth = s.positive("depth");
  spec.modes = s.positive("modes");
  spec.options.mode_dropout = s.real("dropout");
  spec.options.gain_normalize = s.flag("gain-normalize");
  if (!(spec.options.mode_dropout >= 0.0 && spec.options.mode_dropout < 1.0))
    throw ConfigError("--dropout must lie in [0, 1)");
  TrainConfig cfg;
  cfg.learning_rate = s.real("lr");
  cfg.weight_decay = s.real("wd");
  cfg.epochs = s.count("epochs");
  cfg.batch_size = s.count("batch");
  cfg.seed = s.u64("seed");
  cfg.train_samples = s.count("train-samples");
  cfg.val_samples = s.count("val-samples");
  cfg.validate();
  const std::size_t size = s.positive("size");

  ManifestWriter manifest(out_dir, "train", s);
  ModelFile model = init_model(arch, kind, size, spec, cfg.seed, cfg.stats_samples);
  const TrainResult result = train(model, cfg, [&](const EpochLog& e) {
    if (e.split != "val" || (e.epoch % 10 != 0 && e.epoch != cfg.epochs)) return;
    err << "epoch " << e.epoch << " val loss " << e.metrics.loss << " "
        << (kind == TaskKind::synthshape ? "dice " : "accuracy ") << headline(e.metrics, kind) << "\n";
  });

  save_model(manifest.path("model.json"), result.best);
  manifest.add("model", manifest.path("model.json"));
  save_model(manifest.path("last_model.json"), result.last);
  manifest.add("last_model", manifest.path("last_model.json"));
  write_text_file(manifest.path("optimizer.json"), optimizer_to_json(result.optimizer));
  manifest.add("optimizer", manifest.path("optimizer.json"));
  write_text_file(manifest.path("metrics.csv"), metrics_csv(result.log, kind));
  manifest.add("metrics", manifest.path("metrics.csv"));
  manifest.finish(result.diverged ? "diverged" : "ok");

  if (result.diverged) err << "training diverged in " << result.diverged_block << ": " << result.message << "\n";
  out << "best validation " << (kind == TaskKind::synthshape ? "dice " : "accuracy ") << format_real(result.best_metric)
      << " at epoch " << result.best_epoch << "\n";
  return kExitOk;
}

int cmd_eval(const Settings& s, const std::string& out_dir, std::ostream& out) {
  const fs::path model_path = s.required_text("model");
  verify_model_against_manifest(model_path);
  const ModelFile model = load_model(model_path);
  const auto rows = evaluate_robustness(model, s.positive("samples"), s.u64("seed"), s.flag("combined"));
  const std::string csv = robustness_csv(rows);
  if (auto manifest = maybe_manifest(s, out_dir, "eval")) {
    write_text_file(manifest->path("robustness.csv"), csv);
    manifest->add("robustness", manifest->path("robustness.csv"));
    manifest->finish("ok");
  }
  out << csv;
  return kExitOk;
}

int cmd_gradcheck(const Settings& s, const std::string& out_dir, std::ostream& out) {
  const double h = s.real("step"), threshold = s.real("threshold");
  if (!(h > 0.0) || !(threshold > 0.0)) throw ConfigError("--step and --threshold must be positive");
  const auto setup = default_gradcheck_setup(s.u64("seed"));
  const auto report = gradient_check(setup.net, setup.batch, setup.objective, h, threshold);
  if (auto manifest = maybe_manifest(s, out_dir, "gradcheck")) {
    write_text_file(manifest->path("gradcheck.csv"), report.to_csv());
    manifest->add("gradcheck", manifest->path("gradcheck.csv"));
    manifest->finish(report.passed() ? "ok" : "failed");
  }
  out << report.to_csv();
  out << (report.passed() ? "PASS" : "FAIL") << " max relative error " << format_real(report.max_rel) << " (worst "
      << report.worst().key << ", threshold " << format_real(threshold) << ")\n";
  if (!report.passed()) throw VerificationFailure("gradient check failed");
  return kExitOk;
}

int cmd_verify(const Settings& s, const std::string& out_dir, std::ostream& out) {
  const std::uint64_t seed = s.u64("seed");
  auto checks = oracle::run_oracle_suite(seed);
  const auto setup = default_gradcheck_setup(seed);
  const auto report = gradient_check(setup.net, setup.batch, setup.objective);
  checks.push_back({"gradient_check", report.passed(), report.max_rel, report.threshold, "worst " + report.worst().key});

  std::ostringstream csv;
  csv << "check,pass,value,tolerance,detail\n";
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << format_real(c.value)
        << " tolerance=" << format_real(c.tolerance) << " " << c.detail << "\n";
    std::string detail = c.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    csv << c.name << "," << (c.passed ? "true" : "false") << "," << format_real(c.value) << ","
        << format_real(c.tolerance) << "," << detail << "\n";
  }
  if (auto manifest = maybe_manifest(s, out_dir, "verify")) {
    write_text_file(manifest->path("verify.csv"), csv.str());
    manifest->add("verify", manifest->path("verify.csv"));
    manifest->finish(all ? "ok" : "failed");
  }
  if (!all) throw VerificationFailure("oracle suite failed");
  return kExitOk;
}

int cmd_resample(const Settings& s, const std::string& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  const ModelFile model = load_model(s.required_text("model"));
  if (model.arch != Architecture::sonic) throw ConfigError("resample needs a spectral model");
  const auto grids = s.dims("dims");
  if (grids.empty()) throw ConfigError("--dims is required");
  const auto spacing = s.reals("spacing");

  ManifestWriter manifest(out_dir, "resample", s);
  for (const auto& dims : grids) {
    const GridPtr grid = grid_of(dims, spacing);
    std::ostringstream symbol_csv, gain_csv;
    symbol_csv << "block,k,c";
    for (std::size_t d = 0; d < dims.size(); ++d) symbol_csv << ",omega_" << d;
    symbol_csv << ",re,im\n";
    gain_csv << "block,k,gain\n";
    std::vector<double> omega(dims.size());
    for (std::size_t b = 0; b < model.sonic.blocks.size(); ++b) {
      const SonicBlock& block = model.sonic.blocks[b];
      if (block.shape().dims != dims.size()) throw ConfigError("--dims rank does not match the model");
      const SymbolTerms terms = expand_symbol(block, grid);
      const std::size_t K = block.shape().out_channels, C = block.shape().in_channels, bins = grid->half_size();
      for (std::size_t k = 0; k < K; ++k) {
        gain_csv << b << "," << k << "," << format_real(terms.gains[k]) << "\n";
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t n = 0; n < bins; ++n) {
            grid->half_omega(n, omega);
            const complex v = terms.raw[(k * C + c) * bins + n];
            symbol_csv << b << "," << k << "," << c;
            for (double w : omega) symbol_csv << "," << format_real(w);
            symbol_csv << "," << format_real(v.real()) << "," << format_real(v.imag()) << "\n";
          }
        }
      }
    }
    const std::string label = dims_label(dims);
    write_text_file(manifest.path("symbol_" + label + ".csv"), symbol_csv.str());
    manifest.add("symbol_" + label, manifest.path("symbol_" + label + ".csv"));
    write_text_file(manifest.path("gains_" + label + ".csv"), gain_csv.str());
    manifest.add("gains_" + label, manifest.path("gains_" + label + ".csv"));
    out << "grid " << label << ": " << model.sonic.blocks.size() << " blocks, " << grid->half_size()
        << " half-spectrum bins\n";
  }
  manifest.finish("ok");
  return kExitOk;
}

/// Energy sum_{k,c} |H_kc|^2 on the full 2-D grid, zero frequency centred, scaled to a maximum of 1.
std::vector<double> centred_energy(const std::vector<double>& half_energy, std::size_t H, std::size_t W) {
  const std::size_t Wh = W / 2 + 1;
  std::vector<double> full(H * W);
  double hi = 0.0;
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const double e = c < Wh ? half_energy[r * Wh + c] : half_energy[((H - r) % H) * Wh + (W - c)];
      full[((r + H / 2) % H) * W + (c + W / 2) % W] = e;
      hi = std::max(hi, e);
    }
  }
  if (hi > 0.0)
    for (double& e : full) e /= hi;
  return full;
}

std::vector<std::vector<double>> stage_energies(const ModelFile& model, const GridPtr& grid) {
  std::vector<std::vector<double>> stages;
  const std::size_t bins = grid->half_size();
  if (model.arch == Architecture::sonic) {
    for (const auto& block : model.sonic.blocks) {
      const SpectralSymbol symbol = assemble_symbol(block, grid);
      std::vector<double> e(bins, 0.0);
      for (std::size_t i = 0; i < symbol.values.size(); ++i) e[i % bins] += std::norm(symbol.values[i]);
      stages.push_back(std::move(e));
    }
    return stages;
  }
  const std::size_t H = grid->dims()[0], W = grid->dims()[1];
  if (H < 3 || W < 3) throw ConfigError("kernel spectra need a grid of at least 3x3");
  for (const auto& layer : model.conv.layers) {
    const std::size_t pairs = layer.out_channels * layer.in_channels;
    Signal taps(pairs, grid);
    for (std::size_t p = 0; p < pairs; ++p)
      for (std::size_t t = 0; t < 9; ++t) {
        const std::size_t r = (H + t / 3 - 1) % H, c = (W + t % 3 - 1) % W;
        taps.channel(p)[r * W + c] = layer.weights[p * 9 + t];
      }
    const Spectrum spec = dft_forward(taps);
    std::vector<double> e(bins, 0.0);
    for (std::size_t i = 0; i < spec.data.size(); ++i) e[i % bins] += std::norm(spec.data[i]);
    stages.push_back(std::move(e));
  }
  return stages;
}

int cmd_export_spectrum(const Settings& s, const std::string& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  const ModelFile model = load_model(s.required_text("model"));
  const std::size_t size = s.positive("size");
  const GridPtr grid = make_grid({size, size});
  const auto stages = stage_energies(model, grid);

  ManifestWriter manifest(out_dir, "export-spectrum", s);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto full = centred_energy(stages[i], size, size);
    const std::string stem = "spectrum_stage" + std::to_string(i);
    write_pgm_field(manifest.path(stem + ".pgm"), full, size, size);
    manifest.add(stem + "_pgm", manifest.path(stem + ".pgm"));
    std::ostringstream csv;
    csv << "row,col,freq_row,freq_col,energy\n";
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c)
        csv << r << "," << c << "," << static_cast<long>(r) - static_cast<long>(size / 2) << ","
            << static_cast<long>(c) - static_cast<long>(size / 2) << "," << format_real(full[r * size + c]) << "\n";
    write_text_file(manifest.path(stem + ".csv"), csv.str());
    manifest.add(stem + "_csv", manifest.path(stem + ".csv"));
  }
  manifest.finish("ok");
  out << "exported " << stages.size() << " stage spectra at " << size << "x" << size << "\n";
  return kExitOk;
}

int cmd_bench(const Settings& s, const std::string& out_dir, std::ostream& out) {
  auto grids = s.dims("dims");
  if (grids.empty()) grids = {{32, 32}, {64, 64}, {128, 128}};
  const std::size_t repeats = s.positive("repeats"), warmup = s.count("warmup");
  const BlockShape shape{s.positive("modes"), s.positive("channels"), s.positive("width"), 2};
  // Timings are single-threaded.
  ::setenv("SONIC_THREADS", "1", 1);
  CounterRng rng(s.u64("seed"));
  const SonicBlock block = SonicBlock::initialize(shape, {}, rng);

  std::ostringstream csv;
  csv << "height,width,points,median_ms\n";
  std::vector<double> medians;
  for (const auto& dims : grids) {
    if (dims.size() != 2) throw ConfigError("bench grids must be two-dimensional");
    const GridPtr grid = make_grid(dims);
    Signal x(shape.in_channels, grid);
    for (double& v : x.data) v = rng.normal();
    for (std::size_t i = 0; i < warmup; ++i) (void)block_forward(block, x);
    std::vector<double> ms(repeats);
    for (auto& t : ms) {
      const auto t0 = std::chrono::steady_clock::now();
      const Signal y = block_forward(block, x);
      t = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (y.data.empty()) throw std::logic_error("empty block output");
    }
    std::sort(ms.begin(), ms.end());
    const double median = repeats % 2 ? ms[repeats / 2] : 0.5 * (ms[repeats / 2 - 1] + ms[repeats / 2]);
    medians.push_back(median);
    csv << dims[0] << "," << dims[1] << "," << grid->size() << "," << format_real(median) << "\n";
  }
  if (auto manifest = maybe_manifest(s, out_dir, "bench")) {
    write_text_file(manifest->path("bench.csv"), csv.str());
    manifest->add("bench", manifest->path("bench.csv"));
    manifest->finish("ok");
  }
  out << csv.str();
  for (std::size_t i = 1; i < medians.size(); ++i)
    out << "ratio " << dims_label(grids[i]) << "/" << dims_label(grids[i - 1]) << " = "
        << format_real(medians[i] / medians[i - 1]) << "\n";
  return kExitOk;
}

struct Command {
  std::string_view name;
  std::string_view help;
  std::vector<std::string_view> flags;
  std::function<int(const Settings&, const std::string&, std::ostream&, std::ostream&)> run;
};

std::vector<Command> commands() {
  return {
      {"gen", "generate task samples", {"seed", "size", "task", "count", "png", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) { return cmd_gen(s, o, out); }},
      {"train", "train a model",
       {"seed", "size", "task", "arch", "modes", "width", "depth", "epochs", "lr", "wd", "batch", "train-samples",
        "val-samples", "dropout", "gain-normalize", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream& err) {
         return cmd_train(s, o, out, err);
       }},
      {"eval", "evaluate a trained model on clean and perturbed held-out data",
       {"model", "samples", "seed", "combined", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) { return cmd_eval(s, o, out); }},
      {"gradcheck", "compare analytic and finite-difference gradients", {"seed", "threshold", "step", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) {
         return cmd_gradcheck(s, o, out);
       }},
      {"verify", "run the oracle suite", {"seed", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) { return cmd_verify(s, o, out); }},
      {"resample", "evaluate a model's symbol on other grids", {"model", "dims", "spacing", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) {
         return cmd_resample(s, o, out);
       }},
      {"export-spectrum", "export normalized spectral energy per stage", {"model", "size", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) {
         return cmd_export_spectrum(s, o, out);
       }},
      {"bench", "time block_forward across resolutions",
       {"seed", "dims", "modes", "channels", "width", "repeats", "warmup", "out", "config"},
       [](const Settings& s, const std::string& o, std::ostream& out, std::ostream&) { return cmd_bench(s, o, out); }},
  };
}

json flag_value(const FlagSpec& f, const std::vector<std::string>& given) {
  switch (f.type) {
    case FlagType::u64:
    case FlagType::count: return parse_u64(given.back(), f.name);
    case FlagType::real: return parse_real(given.back(), f.name);
    case FlagType::text: return given.back();
    case FlagType::boolean: return true;
    case FlagType::reals: {
      json v = json::array();
      for (const auto& part : split(given.back(), ',')) v.push_back(parse_real(part, f.name));
      return v;
    }
    case FlagType::dims: {
      json v = json::array();
      for (const auto& g : given) v.push_back(parse_dims(g, f.name));
      return v;
    }
  }
  throw std::logic_error("unhandled flag type");
}

}  // namespace

json RunManifest::to_json() const {
  json j;
  j["format"] = "sonic-manifest";
  j["command"] = command;
  j["version"] = version;
  j["seed"] = seed;
  j["config"] = config;
  j["outputs"] = outputs;
  j["hashes"] = hashes;
  j["started"] = started;
  j["finished"] = finished;
  j["status"] = status;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  if (j.value("format", "") != "sonic-manifest") throw std::invalid_argument("not a run manifest");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config = j.at("config");
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
  m.started = j.at("started").get<std::string>();
  m.finished = j.at("finished").get<std::string>();
  m.status = j.at("status").get<std::string>();
  return m;
}

void verify_model_against_manifest(const fs::path& model) {
  const fs::path manifest_path = model.parent_path() / kManifestName;
  if (!fs::exists(manifest_path)) throw std::runtime_error("no run manifest beside " + model.string());
  const RunManifest manifest = RunManifest::from_json(json::parse(read_text_file(manifest_path)));
  std::error_code ec;
  for (const auto& [name, path] : manifest.outputs) {
    if (!fs::equivalent(model.parent_path() / path, model, ec)) continue;
    const auto recorded = manifest.hashes.find(name);
    const std::string actual = file_hash(model);
    if (recorded == manifest.hashes.end() || recorded->second != actual)
      throw std::runtime_error("model hash " + actual + " does not match the run manifest for " + model.string());
    return;
  }
  throw std::runtime_error("run manifest does not list " + model.string());
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral operator networks: data generation, training, evaluation and verification.", "sonic"};
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  const auto cmds = commands();
  std::map<std::string, std::vector<std::string>> given;
  std::map<std::string, std::size_t> switches;
  std::vector<std::pair<const Command*, CLI::App*>> subs;
  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(std::string(cmd.name), std::string(cmd.help));
    for (auto name : cmd.flags) {
      const FlagSpec& f = flag_spec(name);
      const std::string key = std::string(cmd.name) + "/" + std::string(name);
      if (f.type == FlagType::boolean) {
        sub->add_flag("--" + std::string(name), switches[key], std::string(f.help));
      } else {
        auto* opt = sub->add_option("--" + std::string(name), given[key], std::string(f.help));
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->allow_extra_args(false);
        opt->type_name(type_label(f.type));
      }
    }
    subs.emplace_back(&cmd, sub);
  }

  if (args.empty()) {
    err << app.help();
    return kExitValidation;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  const Command* cmd = nullptr;
  for (const auto& [c, sub] : subs)
    if (sub->parsed()) cmd = c;
  if (!cmd) {
    err << app.help();
    return kExitValidation;
  }

  try {
    Settings settings;
    std::string out_dir, config_path;
    for (auto name : cmd->flags) {
      if (name == "out" || name == "config") continue;
      settings.values[config_key(name)] = default_value(name);
    }
    const std::string prefix = std::string(cmd->name) + "/";
    if (const auto& c = given[prefix + "config"]; !c.empty()) config_path = c.back();
    if (const auto& o = given[prefix + "out"]; !o.empty()) out_dir = o.back();

    if (!config_path.empty()) {
      const json file = load_config_file(config_path);
      for (const auto& [key, value] : file.items()) {
        const FlagSpec* spec = nullptr;
        for (const auto& f : kFlags)
          if (config_key(f.name) == key) spec = &f;
        if (!spec) throw ConfigError("unknown config key '" + key + "'");
        if (!settings.values.contains(key)) continue;  // applies to another command
        check_value(value, *spec);
        settings.values[key] = value;
      }
    }
    for (auto name : cmd->flags) {
      if (name == "out" || name == "config") continue;
      const FlagSpec& f = flag_spec(name);
      const std::string key = prefix + std::string(name);
      if (f.type == FlagType::boolean) {
        if (switches[key] > 0) settings.values[config_key(name)] = true;
      } else if (!given[key].empty()) {
        settings.values[config_key(name)] = flag_value(f, given[key]);
      }
    }
    return cmd->run(settings, out_dir, out, err);
  } catch (const VerificationFailure& e) {
    err << "verification failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace sonic::cli
