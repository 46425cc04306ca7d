#include "sonic/serialization.hpp"

#include "sonic/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sonic {
namespace {

using Json = nlohmann::ordered_json;

void dump(const Json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        dump(value, out, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], out, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump(j[i], out, depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_real(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

std::string to_text(const Json& j) {
  std::string out;
  dump(j, out, 0);
  out += "\n";
  return out;
}

Json real_array(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json matrix(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Json a = Json::array();
  for (std::size_t r = 0; r < rows; ++r) a.push_back(real_array(v.subspan(r * cols, cols)));
  return a;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::size_t get_size(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw std::invalid_argument(std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double get_real(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> read_array(const Json& j, const char* key, std::size_t expected) {
  const Json& v = field(j, key);
  if (!v.is_array() || v.size() != expected)
    throw std::invalid_argument(std::string("field '") + key + "' must hold " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& e : v) {
    if (!e.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<double> read_matrix(const Json& j, const char* key, std::size_t rows, std::size_t cols) {
  const Json& v = field(j, key);
  if (!v.is_array() || v.size() != rows)
    throw std::invalid_argument(std::string("field '") + key + "' must have " + std::to_string(rows) + " rows");
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& row : v) {
    if (!row.is_array() || row.size() != cols)
      throw std::invalid_argument(std::string("field '") + key + "' must have " + std::to_string(cols) + " columns");
    for (const auto& e : row) {
      if (!e.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
  }
  return out;
}

Json parse(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
  }
}

Json network_json(const SonicNetwork& net) {
  net.validate();
  Json j;
  j["format"] = "sonic-network";
  j["version"] = 1;
  Json blocks = Json::array();
  for (const auto& b : net.blocks) {
    const auto& s = b.shape();
    const auto& p = b.params;
    Json jb;
    jb["M"] = s.modes;
    jb["C"] = s.in_channels;
    jb["K"] = s.out_channels;
    jb["D"] = s.dims;
    jb["rho"] = p.rho;
    jb["epsilon"] = b.options.epsilon;
    jb["mode_dropout"] = b.options.mode_dropout;
    jb["gain_normalize"] = b.options.gain_normalize;
    jb["slab_rows"] = b.options.slab_rows;
    jb["sigma"] = real_array(p.sigma);
    jb["alpha"] = real_array(p.alpha);
    jb["beta"] = real_array(p.beta);
    jb["t"] = real_array(p.t);
    jb["u"] = matrix(p.u, s.modes, s.dims);
    jb["B_re"] = matrix(p.B_re, s.modes, s.in_channels);
    jb["B_im"] = matrix(p.B_im, s.modes, s.in_channels);
    jb["C_re"] = matrix(p.C_re, s.out_channels, s.modes);
    jb["C_im"] = matrix(p.C_im, s.out_channels, s.modes);
    jb["W_s"] = matrix(p.W_s, s.out_channels, s.in_channels);
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  j["out_channels"] = net.out_channels;
  j["head"] = matrix(net.head, net.out_channels, net.feature_channels());
  return j;
}

SonicNetwork network_from(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "sonic-network")
    throw std::invalid_argument("not a sonic-network document");
  SonicNetwork net;
  const Json& blocks = field(j, "blocks");
  if (!blocks.is_array() || blocks.empty()) throw std::invalid_argument("'blocks' must be a non-empty array");
  for (const auto& jb : blocks) {
    BlockShape s{get_size(jb, "M"), get_size(jb, "C"), get_size(jb, "K"), get_size(jb, "D")};
    if (s.modes == 0 || s.in_channels == 0 || s.out_channels == 0 || s.dims == 0)
      throw ConfigError("block sizes must be positive");
    SonicBlock b;
    b.params = BlockParameters::zeros(s);
    auto& p = b.params;
    p.rho = get_real(jb, "rho");
    b.options.epsilon = get_real(jb, "epsilon");
    b.options.mode_dropout = get_real(jb, "mode_dropout");
    const Json& gain = field(jb, "gain_normalize");
    if (!gain.is_boolean()) throw std::invalid_argument("'gain_normalize' must be a boolean");
    b.options.gain_normalize = gain.get<bool>();
    b.options.slab_rows = get_size(jb, "slab_rows");
    p.sigma = read_array(jb, "sigma", s.modes);
    p.alpha = read_array(jb, "alpha", s.modes);
    p.beta = read_array(jb, "beta", s.modes);
    p.t = read_array(jb, "t", s.modes);
    p.u = read_matrix(jb, "u", s.modes, s.dims);
    p.B_re = read_matrix(jb, "B_re", s.modes, s.in_channels);
    p.B_im = read_matrix(jb, "B_im", s.modes, s.in_channels);
    p.C_re = read_matrix(jb, "C_re", s.out_channels, s.modes);
    p.C_im = read_matrix(jb, "C_im", s.out_channels, s.modes);
    p.W_s = read_matrix(jb, "W_s", s.out_channels, s.in_channels);
    net.blocks.push_back(std::move(b));
  }
  net.out_channels = get_size(j, "out_channels");
  net.head = read_matrix(j, "head", net.out_channels, net.blocks.back().shape().out_channels);
  net.validate();
  return net;
}

Json conv_json(const ConvNet& net) {
  net.validate();
  Json j;
  Json layers = Json::array();
  for (const auto& l : net.layers) {
    Json jl;
    jl["in_channels"] = l.in_channels;
    jl["out_channels"] = l.out_channels;
    jl["weights"] = matrix(l.weights, l.out_channels, l.in_channels * 9);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  j["out_channels"] = net.out_channels;
  j["head"] = matrix(net.head, net.out_channels, net.feature_channels());
  return j;
}

ConvNet conv_from(const Json& j) {
  ConvNet net;
  const Json& layers = field(j, "layers");
  if (!layers.is_array() || layers.empty()) throw std::invalid_argument("'layers' must be a non-empty array");
  for (const auto& jl : layers) {
    ConvLayer l;
    l.in_channels = get_size(jl, "in_channels");
    l.out_channels = get_size(jl, "out_channels");
    l.weights = read_matrix(jl, "weights", l.out_channels, l.in_channels * 9);
    net.layers.push_back(std::move(l));
  }
  net.out_channels = get_size(j, "out_channels");
  net.head = read_matrix(j, "head", net.out_channels, net.layers.back().out_channels);
  net.validate();
  return net;
}

}  // namespace

std::string format_real(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("cannot serialize a non-finite real");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view to_string(Architecture a) noexcept { return a == Architecture::sonic ? "sonic" : "conv"; }

Architecture parse_architecture(std::string_view name) {
  if (name == "sonic") return Architecture::sonic;
  if (name == "conv") return Architecture::conv;
  throw std::invalid_argument("unknown architecture '" + std::string(name) + "' (expected sonic or conv)");
}

std::string network_to_json(const SonicNetwork& net) { return to_text(network_json(net)); }

SonicNetwork network_from_json(std::string_view text) { return network_from(parse(text)); }

std::string model_to_json(const ModelFile& m) {
  Json j;
  j["format"] = "sonic-model";
  j["version"] = 1;
  j["arch"] = std::string(to_string(m.arch));
  j["task"] = std::string(to_string(m.task));
  j["image_size"] = m.image_size;
  j["center_patch"] = m.center_patch;
  j["input_mean"] = real_array(m.input_stats.mean);
  j["input_std"] = real_array(m.input_stats.stddev);
  if (m.arch == Architecture::sonic)
    j["network"] = network_json(m.sonic);
  else
    j["network"] = conv_json(m.conv);
  return to_text(j);
}

ModelFile model_from_json(std::string_view text) {
  const Json j = parse(text);
  if (!j.is_object() || j.value("format", "") != "sonic-model") throw std::invalid_argument("not a sonic-model document");
  ModelFile m;
  m.arch = parse_architecture(field(j, "arch").get<std::string>());
  m.task = parse_task_kind(field(j, "task").get<std::string>());
  m.image_size = get_size(j, "image_size");
  m.center_patch = get_size(j, "center_patch");
  const std::size_t channels = field(j, "input_mean").size();
  m.input_stats.mean = read_array(j, "input_mean", channels);
  m.input_stats.stddev = read_array(j, "input_std", channels);
  if (m.arch == Architecture::sonic)
    m.sonic = network_from(field(j, "network"));
  else
    m.conv = conv_from(field(j, "network"));
  return m;
}

std::string optimizer_to_json(const AdamW& opt) {
  Json j;
  j["format"] = "sonic-optimizer";
  j["version"] = 1;
  j["step"] = opt.steps();
  j["beta1"] = opt.config().beta1;
  j["beta2"] = opt.config().beta2;
  j["eps"] = opt.config().eps;
  j["weight_decay"] = opt.config().weight_decay;
  Json moments = Json::object();
  for (const auto& [key, mom] : opt.state()) {
    Json e;
    e["m"] = real_array(mom.m);
    e["v"] = real_array(mom.v);
    moments[key] = std::move(e);
  }
  j["moments"] = std::move(moments);
  return to_text(j);
}

AdamW optimizer_from_json(std::string_view text) {
  const Json j = parse(text);
  if (!j.is_object() || j.value("format", "") != "sonic-optimizer")
    throw std::invalid_argument("not a sonic-optimizer document");
  AdamWConfig cfg{get_real(j, "beta1"), get_real(j, "beta2"), get_real(j, "eps"), get_real(j, "weight_decay")};
  AdamW opt(cfg);
  std::map<std::string, AdamW::Moments> state;
  for (const auto& [key, e] : field(j, "moments").items()) {
    const std::size_t n = field(e, "m").size();
    state[key] = {read_array(e, "m", n), read_array(e, "v", n)};
  }
  opt.restore(get_size(j, "step"), std::move(state));
  return opt;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  write_text_file(path, model_to_json(model));
}

ModelFile load_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sonic
