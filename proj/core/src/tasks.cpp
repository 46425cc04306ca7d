#include "sonic/tasks.hpp"

#include "sonic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sonic {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kImageChannels = 3;

// Size factors relative to the equal-area radius r.
const double kSquareHalf = std::sqrt(kPi) / 2.0;
const double kTriangleCircum = std::sqrt(kPi / (0.75 * std::sqrt(3.0)));
const double kCrossArm = std::sqrt(9.0 * kPi / 20.0);  // half length; half width is a third of it
constexpr double kStarInner = 0.5;                       // inner / outer vertex radius
const double kStarOuter = std::sqrt(kPi / (5.0 * kStarInner * std::sin(kPi / 5.0)));

std::array<double, 3> jittered_color(int cls, double jitter, CounterRng& rng) {
  auto c = base_color(cls);
  for (double& v : c) v = std::clamp(v + rng.uniform(-jitter, jitter), 0.0, 1.0);
  return c;
}

// Pixels covered by the shape, as flat indices, row-major.
std::vector<std::size_t> rasterize(const ShapeRecord& s, std::size_t H, std::size_t W) {
  const double ext = shape_extent(s);
  const auto lo = [](double v) { return static_cast<std::ptrdiff_t>(std::floor(v)); };
  const std::ptrdiff_t r0 = std::max<std::ptrdiff_t>(0, lo(s.cy - ext));
  const std::ptrdiff_t r1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(H) - 1, lo(s.cy + ext) + 1);
  const std::ptrdiff_t c0 = std::max<std::ptrdiff_t>(0, lo(s.cx - ext));
  const std::ptrdiff_t c1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W) - 1, lo(s.cx + ext) + 1);
  std::vector<std::size_t> pixels;
  for (std::ptrdiff_t r = r0; r <= r1; ++r)
    for (std::ptrdiff_t c = c0; c <= c1; ++c)
      if (shape_contains(s, static_cast<double>(c), static_cast<double>(r)))
        pixels.push_back(static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c));
  return pixels;
}

void paint(TaskSample& sample, const ShapeRecord& s, std::span<const std::size_t> pixels, int mask_id) {
  const std::size_t P = sample.image.points();
  for (std::size_t idx : pixels) {
    for (std::size_t ch = 0; ch < kImageChannels; ++ch) sample.image.data[ch * P + idx] = s.color[ch];
    sample.mask[idx] = mask_id;
  }
}

TaskSample blank(TaskKind kind, std::uint64_t seed, std::size_t H, std::size_t W) {
  TaskSample s;
  s.kind = kind;
  s.seed = seed;
  s.image = Signal(kImageChannels, image_grid(H, W));
  s.mask.assign(H * W, 0);
  return s;
}

TaskSample like(const TaskSample& src) {
  TaskSample out = blank(src.kind, src.seed, src.height(), src.width());
  out.label = src.label;
  return out;
}

double bilinear_zero(std::span<const double> plane, std::size_t H, std::size_t W, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double tx = x - fx, ty = y - fy;
  const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
  auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(H) || c >= static_cast<std::ptrdiff_t>(W)) return 0.0;
    return plane[static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c)];
  };
  return (1.0 - ty) * ((1.0 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
         ty * ((1.0 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
}

int nearest_zero(std::span<const int> mask, std::size_t H, std::size_t W, double x, double y) {
  const auto c = static_cast<std::ptrdiff_t>(std::lround(x));
  const auto r = static_cast<std::ptrdiff_t>(std::lround(y));
  if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(H) || c >= static_cast<std::ptrdiff_t>(W)) return 0;
  return mask[static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c)];
}

// Backward warp: output pixel (x, y) samples the source at map(x, y).
template <class Map>
TaskSample warp(const TaskSample& src, Map map) {
  const std::size_t H = src.height(), W = src.width(), P = H * W;
  TaskSample out = like(src);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const auto [sx, sy] = map(static_cast<double>(c), static_cast<double>(r));
      const std::size_t idx = r * W + c;
      for (std::size_t ch = 0; ch < kImageChannels; ++ch)
        out.image.data[ch * P + idx] = bilinear_zero(src.image.channel(ch), H, W, sx, sy);
      out.mask[idx] = nearest_zero(src.mask, H, W, sx, sy);
    }
  }
  return out;
}

// Half-pixel-centre source coordinate, clamped to the valid range.
double resize_coord(std::size_t dst, std::size_t in, std::size_t out) {
  const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
  return std::clamp(s, 0.0, static_cast<double>(in - 1));
}

std::vector<double> resize_bilinear(std::span<const double> plane, std::size_t H, std::size_t W,
                                    std::size_t H2, std::size_t W2) {
  std::vector<double> out(H2 * W2);
  for (std::size_t r = 0; r < H2; ++r) {
    const double sy = resize_coord(r, H, H2);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double ty = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < W2; ++c) {
      const double sx = resize_coord(c, W, W2);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double tx = sx - static_cast<double>(x0);
      out[r * W2 + c] = (1.0 - ty) * ((1.0 - tx) * plane[y0 * W + x0] + tx * plane[y0 * W + x1]) +
                        ty * ((1.0 - tx) * plane[y1 * W + x0] + tx * plane[y1 * W + x1]);
    }
  }
  return out;
}

std::vector<int> resize_nearest(std::span<const int> mask, std::size_t H, std::size_t W, std::size_t H2,
                                std::size_t W2) {
  std::vector<int> out(H2 * W2);
  for (std::size_t r = 0; r < H2; ++r) {
    const auto sy = static_cast<std::size_t>(std::lround(resize_coord(r, H, H2)));
    for (std::size_t c = 0; c < W2; ++c) {
      const auto sx = static_cast<std::size_t>(std::lround(resize_coord(c, W, W2)));
      out[r * W2 + c] = mask[sy * W + sx];
    }
  }
  return out;
}

TaskSample rescale(const TaskSample& src, double factor) {
  const std::size_t H = src.height(), W = src.width();
  const auto H2 = static_cast<std::size_t>(std::max(1L, std::lround(factor * static_cast<double>(H))));
  const auto W2 = static_cast<std::size_t>(std::max(1L, std::lround(factor * static_cast<double>(W))));
  if (H2 == H && W2 == W) {
    TaskSample out = src;
    out.shapes.clear();
    return out;
  }
  TaskSample out = like(src);
  for (std::size_t ch = 0; ch < kImageChannels; ++ch) {
    const auto small = resize_bilinear(src.image.channel(ch), H, W, H2, W2);
    const auto back = resize_bilinear(small, H2, W2, H, W);
    std::copy(back.begin(), back.end(), out.image.channel(ch).begin());
  }
  out.mask = resize_nearest(resize_nearest(src.mask, H, W, H2, W2), H2, W2, H, W);
  return out;
}

TaskSample rotate(const TaskSample& src, double degrees) {
  const double theta = degrees * kPi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (static_cast<double>(src.width()) - 1.0) / 2.0;
  const double cy = (static_cast<double>(src.height()) - 1.0) / 2.0;
  return warp(src, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{c * dx + s * dy + cx, -s * dx + c * dy + cy};
  });
}

std::ptrdiff_t shift_pixels(double fraction, std::size_t side) {
  const double n = std::floor(std::abs(fraction) * static_cast<double>(side) + 1e-9);
  return static_cast<std::ptrdiff_t>(fraction < 0.0 ? -n : n);
}

TaskSample translate(const TaskSample& src, double fraction) {
  const std::size_t H = src.height(), W = src.width(), P = H * W;
  const std::ptrdiff_t dx = shift_pixels(fraction, W), dy = shift_pixels(fraction, H);
  TaskSample out = like(src);
  for (std::size_t r = 0; r < H; ++r) {
    const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r) - dy;
    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(H)) continue;
    for (std::size_t c = 0; c < W; ++c) {
      const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c) - dx;
      if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(W)) continue;
      const std::size_t from = static_cast<std::size_t>(sr) * W + static_cast<std::size_t>(sc);
      for (std::size_t ch = 0; ch < kImageChannels; ++ch) out.image.data[ch * P + r * W + c] = src.image.data[ch * P + from];
      out.mask[r * W + c] = src.mask[from];
    }
  }
  return out;
}

double keys_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

constexpr std::size_t kControl = 4;

// Bicubic interpolation of a kControl x kControl grid at control coordinates (u, v).
double bicubic(const std::array<double, kControl * kControl>& g, double u, double v) {
  const auto iu = static_cast<std::ptrdiff_t>(std::floor(u));
  const auto iv = static_cast<std::ptrdiff_t>(std::floor(v));
  auto clampi = [](std::ptrdiff_t i) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, kControl - 1));
  };
  double acc = 0.0;
  for (std::ptrdiff_t j = -1; j <= 2; ++j) {
    const double wv = keys_weight(v - static_cast<double>(iv + j));
    double row = 0.0;
    for (std::ptrdiff_t i = -1; i <= 2; ++i)
      row += keys_weight(u - static_cast<double>(iu + i)) * g[clampi(iv + j) * kControl + clampi(iu + i)];
    acc += wv * row;
  }
  return acc;
}

TaskSample distort(const TaskSample& src, double sigma, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(static_cast<std::uint64_t>(PerturbationKind::distort));
  std::array<double, kControl * kControl> gx{}, gy{};
  for (auto& v : gx) v = sigma * rng.normal();
  for (auto& v : gy) v = sigma * rng.normal();
  const double su = static_cast<double>(kControl - 1) / std::max(1.0, static_cast<double>(src.width()) - 1.0);
  const double sv = static_cast<double>(kControl - 1) / std::max(1.0, static_cast<double>(src.height()) - 1.0);
  return warp(src, [&](double x, double y) {
    const double u = x * su, v = y * sv;
    return std::pair{x + bicubic(gx, u, v), y + bicubic(gy, u, v)};
  });
}

TaskSample add_noise(const TaskSample& src, double sigma, std::uint64_t seed) {
  TaskSample out = src;
  out.shapes.clear();
  if (sigma == 0.0) return out;
  CounterRng rng = CounterRng(seed).split(static_cast<std::uint64_t>(PerturbationKind::noise));
  for (double& v : out.image.data) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  return out;
}

constexpr std::array<Perturbation, 15> kGrid{{
    {PerturbationKind::rescale, 0.75}, {PerturbationKind::rescale, 1.0}, {PerturbationKind::rescale, 1.5},
    {PerturbationKind::rotate, 15.0}, {PerturbationKind::rotate, 30.0}, {PerturbationKind::rotate, 45.0},
    {PerturbationKind::translate, 0.1}, {PerturbationKind::translate, 0.2}, {PerturbationKind::translate, 0.3},
    {PerturbationKind::distort, 2.0}, {PerturbationKind::distort, 4.0}, {PerturbationKind::distort, 6.0},
    {PerturbationKind::noise, 0.1}, {PerturbationKind::noise, 0.2}, {PerturbationKind::noise, 0.3},
}};

}  // namespace

std::string_view to_string(TaskKind kind) noexcept {
  return kind == TaskKind::synthshape ? "synthshape" : "halligalli";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "synthshape") return TaskKind::synthshape;
  if (name == "halligalli") return TaskKind::halligalli;
  throw std::invalid_argument("unknown task '" + std::string(name) + "' (expected synthshape or halligalli)");
}

bool shape_contains(const ShapeRecord& s, double x, double y) noexcept {
  const double dx = x - s.cx, dy = y - s.cy;
  const double c = std::cos(s.angle), sn = std::sin(s.angle);
  const double lx = c * dx + sn * dy, ly = -sn * dx + c * dy;
  const double r = s.radius;
  switch (s.cls) {
    case kCircle:
      return dx * dx + dy * dy <= r * r;
    case kSquare: {
      const double h = kSquareHalf * r;
      return std::abs(lx) <= h && std::abs(ly) <= h;
    }
    case kTriangle: {
      const double inradius = 0.5 * kTriangleCircum * r;
      for (int k = 0; k < 3; ++k) {
        const double phi = 2.0 * kPi * k / 3.0;
        if (lx * std::cos(phi) + ly * std::sin(phi) > inradius) return false;
      }
      return true;
    }
    case kCross: {
      const double L = kCrossArm * r, w = L / 3.0;
      return (std::abs(lx) <= L && std::abs(ly) <= w) || (std::abs(lx) <= w && std::abs(ly) <= L);
    }
    case kStar: {
      const double outer = kStarOuter * r, inner = kStarInner * outer;
      const double d = std::hypot(lx, ly);
      if (d > outer) return false;
      constexpr double sector = 2.0 * kPi / 5.0;
      double phi = std::fmod(std::atan2(ly, lx) + 2.0 * kPi, sector);
      if (phi > sector / 2.0) phi = sector - phi;
      // Edge from the outer vertex (outer, 0) to the inner vertex at angle pi/5.
      const double ex = inner * std::cos(kPi / 5.0) - outer, ey = inner * std::sin(kPi / 5.0);
      const double qx = d * std::cos(phi) - outer, qy = d * std::sin(phi);
      return ex * qy - ey * qx >= 0.0;
    }
    default:
      return false;
  }
}

double shape_extent(const ShapeRecord& s) noexcept {
  switch (s.cls) {
    case kSquare: return kSquareHalf * std::sqrt(2.0) * s.radius;
    case kTriangle: return kTriangleCircum * s.radius;
    case kCross: return kCrossArm * std::sqrt(10.0) / 3.0 * s.radius;
    case kStar: return kStarOuter * s.radius;
    default: return s.radius;
  }
}

GridPtr image_grid(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw std::invalid_argument("image grid needs positive extents");
  return make_grid({height, width}, {1.0 / static_cast<double>(height), 1.0 / static_cast<double>(width)});
}

std::array<double, 3> base_color(int cls) {
  switch (cls) {
    case kCircle: return {1.0, 0.0, 0.0};
    case kSquare: return {0.0, 1.0, 0.0};
    case kTriangle: return {0.0, 0.0, 1.0};
    case kCross: return {1.0, 1.0, 0.0};
    case kStar: return {1.0, 0.0, 1.0};
    default: throw std::invalid_argument("no base colour for class " + std::to_string(cls));
  }
}

TaskSample gen_synthshape(std::uint64_t seed, std::size_t size, const SynthShapeConfig& cfg) {
  if (size < 16) throw std::invalid_argument("synthshape needs size >= 16");
  if (cfg.min_shapes > cfg.max_shapes || cfg.max_shapes == 0)
    throw std::invalid_argument("synthshape: invalid shape count range");
  if (!(cfg.min_radius > 0.0) || cfg.max_radius < cfg.min_radius)
    throw std::invalid_argument("synthshape: invalid radius range");

  TaskSample sample = blank(TaskKind::synthshape, seed, size, size);
  CounterRng rng(seed);
  const auto S = static_cast<double>(size);
  std::vector<unsigned char> blocked(size * size, 0);
  const std::size_t count = cfg.min_shapes + rng.below(cfg.max_shapes - cfg.min_shapes + 1);

  for (std::size_t i = 0; i < count; ++i) {
    ShapeRecord shape;
    shape.cls = 1 + static_cast<int>(rng.below(5));
    shape.radius = rng.uniform(cfg.min_radius, cfg.max_radius) * S;
    shape.angle = rng.uniform(0.0, 2.0 * kPi);
    shape.color = jittered_color(shape.cls, cfg.color_jitter, rng);
    const double ext = shape_extent(shape);
    if (S - 1.0 - ext < ext) continue;

    for (std::size_t attempt = 0; attempt < cfg.placement_attempts; ++attempt) {
      shape.cx = rng.uniform(ext, S - 1.0 - ext);
      shape.cy = rng.uniform(ext, S - 1.0 - ext);
      const auto pixels = rasterize(shape, size, size);
      if (pixels.empty()) continue;
      if (std::any_of(pixels.begin(), pixels.end(), [&](std::size_t p) { return blocked[p] != 0; })) continue;
      paint(sample, shape, pixels, shape.cls);
      for (std::size_t p : pixels) {
        const std::size_t r = p / size, c = p % size;
        for (std::size_t rr = r == 0 ? 0 : r - 1; rr <= std::min(r + 1, size - 1); ++rr)
          for (std::size_t cc = c == 0 ? 0 : c - 1; cc <= std::min(c + 1, size - 1); ++cc)
            blocked[rr * size + cc] = 1;
      }
      sample.shapes.push_back(shape);
      break;
    }
  }
  return sample;
}

int halligalli_label(const std::array<int, 4>& corner_types) {
  std::array<int, 3> counts{};
  for (int t : corner_types) {
    if (t < 0 || t >= 3) throw std::invalid_argument("halligalli corner type must be 0, 1 or 2");
    ++counts[static_cast<std::size_t>(t)];
  }
  int label = -1;
  for (int t = 0; t < 3; ++t) {
    if (counts[static_cast<std::size_t>(t)] != 2) continue;
    if (label != -1) return -1;
    label = t;
  }
  return label;
}

TaskSample gen_halligalli(std::uint64_t seed, std::size_t size, const HalliGalliConfig& cfg) {
  if (size < 32) throw std::invalid_argument("halligalli needs size >= 32");
  TaskSample sample = blank(TaskKind::halligalli, seed, size, size);
  CounterRng rng(seed);
  const auto S = static_cast<double>(size);

  const int twice = static_cast<int>(rng.below(3));
  std::array<int, 4> types{twice, twice, (twice + 1) % 3, (twice + 2) % 3};
  for (std::size_t i = types.size() - 1; i > 0; --i) std::swap(types[i], types[rng.below(i + 1)]);
  sample.label = halligalli_label(types);

  const double region = cfg.corner * S;
  for (std::size_t corner = 0; corner < 4; ++corner) {
    ShapeRecord shape;
    shape.cls = kCircle + types[corner];
    shape.radius = rng.uniform(cfg.min_radius, cfg.max_radius) * S;
    shape.angle = rng.uniform(0.0, 2.0 * kPi);
    shape.color = jittered_color(shape.cls, cfg.color_jitter, rng);
    const double ext = shape_extent(shape);
    const double lo = ext, hi = region - 1.0 - ext;
    const double ux = hi > lo ? rng.uniform(lo, hi) : 0.5 * (region - 1.0);
    const double uy = hi > lo ? rng.uniform(lo, hi) : 0.5 * (region - 1.0);
    shape.cx = (corner % 2 == 0) ? ux : S - 1.0 - ux;
    shape.cy = (corner < 2) ? uy : S - 1.0 - uy;
    paint(sample, shape, rasterize(shape, size, size), shape.cls);
    sample.shapes.push_back(shape);
  }

  const auto side = static_cast<std::size_t>(std::lround(cfg.center * S));
  const std::size_t start = (size - side) / 2;
  CounterRng texture = rng.split(1);
  const std::size_t P = size * size;
  for (std::size_t r = start; r < start + side; ++r) {
    for (std::size_t c = start; c < start + side; ++c) {
      const double v = texture.uniform();
      for (std::size_t ch = 0; ch < kImageChannels; ++ch) sample.image.data[ch * P + r * size + c] = v;
    }
  }
  return sample;
}

TaskSample generate_sample(TaskKind kind, std::uint64_t seed, std::size_t size) {
  return kind == TaskKind::synthshape ? gen_synthshape(seed, size) : gen_halligalli(seed, size);
}

Signal normalize_channels(const Signal& x, const ChannelStats& stats) {
  if (stats.mean.size() != x.channels || stats.stddev.size() != x.channels)
    throw std::invalid_argument("channel statistics do not match the signal");
  Signal y = x;
  for (std::size_t c = 0; c < x.channels; ++c) {
    const double inv = 1.0 / stats.stddev[c];
    for (double& v : y.channel(c)) v = (v - stats.mean[c]) * inv;
  }
  return y;
}

std::string_view to_string(PerturbationKind kind) noexcept {
  switch (kind) {
    case PerturbationKind::rescale: return "rescale";
    case PerturbationKind::rotate: return "rotate";
    case PerturbationKind::translate: return "translate";
    case PerturbationKind::distort: return "distort";
    case PerturbationKind::noise: return "noise";
  }
  return "unknown";
}

PerturbationKind parse_perturbation_kind(std::string_view name) {
  for (auto k : {PerturbationKind::rescale, PerturbationKind::rotate, PerturbationKind::translate,
                 PerturbationKind::distort, PerturbationKind::noise})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown perturbation kind '" + std::string(name) + "'");
}

void validate(const Perturbation& p) {
  if (!std::isfinite(p.level)) throw std::invalid_argument("perturbation level must be finite");
  switch (p.kind) {
    case PerturbationKind::rescale:
      if (p.level <= 0.0 || p.level > 8.0) throw std::invalid_argument("rescale factor must lie in (0, 8]");
      break;
    case PerturbationKind::rotate:
      break;
    case PerturbationKind::translate:
      if (std::abs(p.level) > 1.0) throw std::invalid_argument("translation fraction must lie in [-1, 1]");
      break;
    case PerturbationKind::distort:
    case PerturbationKind::noise:
      if (p.level < 0.0) throw std::invalid_argument("perturbation sigma must be non-negative");
      break;
    default:
      throw std::invalid_argument("unknown perturbation kind");
  }
}

TaskSample apply_perturbation(const TaskSample& sample, const Perturbation& p, std::uint64_t seed) {
  validate(p);
  switch (p.kind) {
    case PerturbationKind::rescale: return rescale(sample, p.level);
    case PerturbationKind::rotate: return rotate(sample, p.level);
    case PerturbationKind::translate: return translate(sample, p.level);
    case PerturbationKind::distort: return distort(sample, p.level, seed);
    case PerturbationKind::noise: return add_noise(sample, p.level, seed);
  }
  throw std::invalid_argument("unknown perturbation kind");
}

std::span<const Perturbation> robustness_grid() { return kGrid; }

TaskSample apply_combined(const TaskSample& sample, std::size_t tier, std::uint64_t seed) {
  if (tier >= kSeverityTiers) throw std::invalid_argument("combined tier out of range");
  TaskSample out = sample;
  for (std::size_t k = 0; k < 5; ++k) out = apply_perturbation(out, kGrid[k * kSeverityTiers + tier], mix64(seed + k));
  return out;
}

}  // namespace sonic
