#include "qtae/data.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>

namespace qtae {

using nlohmann::json;

// ---- factor spaces -------------------------------------------------------------

std::size_t FactorSpace::index(const std::string& name) const {
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].name == name) return i;
  throw ContractError("factor space has no factor named '" + name + "'");
}

bool FactorSpace::has(const std::string& name) const {
  return std::any_of(factors.begin(), factors.end(), [&](const FactorDef& f) { return f.name == name; });
}

std::vector<std::size_t> FactorSpace::transform_factors() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].transform) out.push_back(i);
  return out;
}

std::size_t FactorSpace::state_count() const {
  std::size_t n = 1;
  for (const auto& f : factors) n *= f.extent;
  return n;
}

LatticeSpec FactorSpace::lattice(std::size_t channels, LatticeMode mode) const {
  LatticeSpec spec;
  spec.channels = channels;
  spec.mode = mode;
  for (auto i : transform_factors()) spec.factors.push_back({factors[i].name, factors[i].extent, factors[i].periodic, 1});
  spec.validate();
  return spec;
}

void FactorSpace::validate() const {
  for (const auto& f : factors) {
    require(f.extent >= 1, "factor '" + f.name + "' needs extent >= 1");
    if (f.transform) require(f.extent >= 2, "transformation factor '" + f.name + "' needs extent >= 2");
    require(f.hi > f.lo || (f.extent == 1 && f.hi >= f.lo), "factor '" + f.name + "' has an empty range");
  }
}

void to_json(json& j, const FactorSpace& s) {
  j = json::array();
  for (const auto& f : s.factors)
    j.push_back({{"name", f.name},
                 {"extent", f.extent},
                 {"periodic", f.periodic},
                 {"range", {f.lo, f.hi}},
                 {"transform", f.transform}});
}

void from_json(const json& j, FactorSpace& s) {
  static const std::vector<std::string> keys{"name", "extent", "periodic", "range", "transform"};
  require(j.is_array(), "factor space must be a JSON array");
  s.factors.clear();
  for (const auto& fj : j) {
    require(fj.is_object(), "factor entry must be a JSON object");
    for (const auto& [key, value] : fj.items())
      require(std::find(keys.begin(), keys.end(), key) != keys.end(), "unknown factor key '" + key + "'");
    FactorDef f;
    f.name = fj.at("name").get<std::string>();
    const bool scene = std::find(std::begin(kSceneFactorNames), std::end(kSceneFactorNames), f.name) !=
                       std::end(kSceneFactorNames);
    if (scene) f = scene_factor(f.name, 2);
    f.extent = fj.at("extent").get<std::size_t>();
    f.periodic = fj.value("periodic", f.periodic);
    if (fj.contains("range")) {
      const auto r = fj.at("range").get<std::vector<double>>();
      require(r.size() == 2, "factor range must be [lo, hi]");
      f.lo = r[0];
      f.hi = r[1];
    }
    f.transform = fj.value("transform", true);
    s.factors.push_back(f);
  }
  s.validate();
}

std::size_t quantise_param(double value, const FactorDef& f) {
  require(f.extent >= 1, "quantise_param: empty factor");
  const double span = f.hi - f.lo;
  if (f.periodic) {
    double w = std::fmod(value - f.lo, span);
    if (w < 0) w += span;
    const auto bin = static_cast<long long>(std::llround(w * static_cast<double>(f.extent) / span));
    return static_cast<std::size_t>(bin % static_cast<long long>(f.extent));
  }
  if (f.extent == 1) return 0;
  const double t = (value - f.lo) / span * static_cast<double>(f.extent - 1);
  require(t >= -0.5 && t <= static_cast<double>(f.extent - 1) + 0.5,
          "quantise_param: value " + std::to_string(value) + " outside the range of '" + f.name + "'");
  const auto bin = std::llround(t);
  return static_cast<std::size_t>(std::clamp<long long>(bin, 0, static_cast<long long>(f.extent - 1)));
}

double dequantise_param(std::size_t index, const FactorDef& f) {
  require(index < f.extent, "dequantise_param: index out of range for '" + f.name + "'");
  if (f.periodic) return f.lo + static_cast<double>(index) * (f.hi - f.lo) / static_cast<double>(f.extent);
  if (f.extent == 1) return f.lo;
  return f.lo + static_cast<double>(index) * (f.hi - f.lo) / static_cast<double>(f.extent - 1);
}

double bin_width(const FactorDef& f) {
  if (f.periodic) return (f.hi - f.lo) / static_cast<double>(f.extent);
  return f.extent > 1 ? (f.hi - f.lo) / static_cast<double>(f.extent - 1) : 0.0;
}

double offset_amount(std::int64_t offset, const FactorDef& f) { return static_cast<double>(offset) * bin_width(f); }

std::vector<std::size_t> apply_offset_to_indices(const FactorSpace& space, const std::vector<std::size_t>& source,
                                                 const LatticeOffset& u) {
  const auto tf = space.transform_factors();
  require(source.size() == space.factors.size(), "index vector arity mismatch");
  require(u.size() == tf.size(), "offset arity does not match the transform factors");
  auto out = source;
  for (std::size_t k = 0; k < tf.size(); ++k) {
    const auto& f = space.factors[tf[k]];
    const auto d = static_cast<std::int64_t>(f.extent);
    std::int64_t t = static_cast<std::int64_t>(source[tf[k]]) + u[k];
    if (f.periodic) {
      t %= d;
      if (t < 0) t += d;
    }
    require(t >= 0 && t < d, "offset moves '" + f.name + "' out of range");
    out[tf[k]] = static_cast<std::size_t>(t);
  }
  return out;
}

namespace {

struct Draw {
  std::vector<std::size_t> source;
  LatticeOffset offset;
};

// Source indices uniform; aperiodic targets uniform in range, periodic offsets
// uniform over one cycle, stored as the signed representative nearest zero.
Draw draw_indices(const FactorSpace& space, std::mt19937_64& rng) {
  Draw d;
  for (const auto& f : space.factors) d.source.push_back(std::uniform_int_distribution<std::size_t>(0, f.extent - 1)(rng));
  for (auto i : space.transform_factors()) {
    const auto& f = space.factors[i];
    const auto e = static_cast<std::int64_t>(f.extent);
    const auto r = static_cast<std::int64_t>(std::uniform_int_distribution<std::size_t>(0, f.extent - 1)(rng));
    if (f.periodic)
      d.offset.components.push_back(r <= (e - 1) / 2 ? r : r - e);
    else
      d.offset.components.push_back(r - static_cast<std::int64_t>(d.source[i]));
  }
  return d;
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

// ---- glyphs and warps -------------------------------------------------------------

Image warp_affine(const Image& image, const AffineParams& p) {
  require(image.rank() == 3, "warp_affine: expected [C,H,W]");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const double cx = (static_cast<double>(W) - 1.0) / 2.0, cy = (static_cast<double>(H) - 1.0) / 2.0;
  // A = scale * R(rotation) * [[1, tan(shear)], [0, 1]]
  const double c = std::cos(p.rotation), s = std::sin(p.rotation), k = std::tan(p.shear);
  const double a00 = p.scale * c, a01 = p.scale * (c * k - s), a10 = p.scale * s, a11 = p.scale * (s * k + c);
  const double det = a00 * a11 - a01 * a10;
  require(std::abs(det) > 1e-12, "warp_affine: singular transform");
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;
  Image out({C, H, W});
  const long Hl = static_cast<long>(H), Wl = static_cast<long>(W);
#pragma omp parallel for schedule(static)
  for (long y = 0; y < Hl; ++y) {
    for (long x = 0; x < Wl; ++x) {
      const double dx = static_cast<double>(x) - cx - p.tx, dy = static_cast<double>(y) - cy - p.ty;
      const double sx = i00 * dx + i01 * dy + cx, sy = i10 * dx + i11 * dy + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      const double ax = sx - fx, ay = sy - fy;
      for (std::size_t ch = 0; ch < C; ++ch) {
        const float* src = image.ptr() + ch * H * W;
        auto at = [&](long yy, long xx) -> double {
          return (yy >= 0 && yy < Hl && xx >= 0 && xx < Wl) ? src[yy * Wl + xx] : 0.0;
        };
        double v = (1 - ay) * ((1 - ax) * at(y0, x0) + (ax > 0 ? ax * at(y0, x0 + 1) : 0.0));
        if (ay > 0) v += ay * ((1 - ax) * at(y0 + 1, x0) + (ax > 0 ? ax * at(y0 + 1, x0 + 1) : 0.0));
        out[(ch * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x)] = static_cast<float>(v);
      }
    }
  }
  return out;
}

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - ax - t * vx, dy = py - ay - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

struct Stroke {
  double ax, ay, bx, by, half_width;
};
struct Ring {
  double cx, cy, a, b, angle, half_width;
};

}  // namespace

Image render_glyph(std::uint64_t seed, std::size_t size) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  const double radius = 12.0 * static_cast<double>(size) / 32.0;
  auto point = [&](double r) {
    const double rr = r * std::sqrt(unit(rng)), th = 2 * std::numbers::pi * unit(rng);
    return std::pair{c + rr * std::cos(th), c + rr * std::sin(th)};
  };
  std::vector<Stroke> strokes;
  const int n = 2 + static_cast<int>(unit(rng) < 0.5);
  for (int i = 0; i < n; ++i) {
    auto [ax, ay] = point(radius);
    auto [bx, by] = point(radius);
    strokes.push_back({ax, ay, bx, by, 1.8 + 0.8 * unit(rng)});
  }
  std::vector<Ring> rings;
  if (unit(rng) < 0.5) {
    auto [rx, ry] = point(3.0);
    rings.push_back({rx, ry, 3.0 + 4.0 * unit(rng), 2.0 + 3.0 * unit(rng), std::numbers::pi * unit(rng), 1.5});
  }
  Image img({1, size, size});
  constexpr int ss = 4;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      int hit = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / ss - 0.5;
          const double py = static_cast<double>(y) + (sy + 0.5) / ss - 0.5;
          bool in = false;
          for (const auto& s : strokes) in = in || segment_distance(px, py, s.ax, s.ay, s.bx, s.by) <= s.half_width;
          for (const auto& r : rings) {
            const double dx = px - r.cx, dy = py - r.cy;
            const double u = std::cos(r.angle) * dx + std::sin(r.angle) * dy;
            const double v = -std::sin(r.angle) * dx + std::cos(r.angle) * dy;
            // first-order distance to the ellipse: |F| / |grad F|
            const double F = u * u / (r.a * r.a) + v * v / (r.b * r.b) - 1.0;
            const double g = 2.0 * std::sqrt(u * u / std::pow(r.a, 4) + v * v / std::pow(r.b, 4));
            in = in || (g > 0 && std::abs(F) / g <= r.half_width);
          }
          hit += in;
        }
      img[y * size + x] = static_cast<float>(hit) / (ss * ss);
    }
  return img;
}

FactorSpace default_affine_space(std::size_t extent) {
  FactorSpace s;
  s.factors = {{"tx", extent, false, -21.0, 21.0, true},
               {"ty", extent, false, -21.0, 21.0, true},
               {"rotation", extent, false, deg(-15.0), deg(15.0), true},
               {"scale", extent, false, 1.0 / 1.9, 1.0, true},
               {"shear", extent, false, deg(-11.0), deg(11.0), true}};
  return s;
}

FactorSpace rotation_space(std::size_t extent) {
  FactorSpace s;
  s.factors = {{"rotation", extent, true, 0.0, 2.0 * std::numbers::pi, true}};
  return s;
}

AffineParams affine_params(const FactorSpace& space, const std::vector<std::size_t>& indices) {
  AffineParams p;
  for (std::size_t i = 0; i < space.factors.size(); ++i) {
    const auto& f = space.factors[i];
    const double v = dequantise_param(indices[i], f);
    if (f.name == "tx")
      p.tx = v;
    else if (f.name == "ty")
      p.ty = v;
    else if (f.name == "rotation")
      p.rotation = v;
    else if (f.name == "scale")
      p.scale = v;
    else if (f.name == "shear")
      p.shear = v;
    else
      throw ContractError("affine generator has no factor named '" + f.name + "'");
  }
  return p;
}

Image glyph_levels(Image image) {
  for (auto& v : image.data()) v = kGlyphBackground + (kGlyphInk - kGlyphBackground) * v;
  return image;
}

SamplePair affine_pair_from_image(const Image& base, std::uint64_t seed, const FactorSpace& space) {
  space.validate();
  std::mt19937_64 rng(seed);
  const auto d = draw_indices(space, rng);
  SamplePair pair;
  pair.source_indices = d.source;
  pair.offset = d.offset;
  pair.target_indices = apply_offset_to_indices(space, d.source, d.offset);
  pair.source = glyph_levels(warp_affine(base, affine_params(space, pair.source_indices)));
  pair.target = glyph_levels(warp_affine(base, affine_params(space, pair.target_indices)));
  pair.content_seed = seed;
  return pair;
}

SamplePair synth_affine_pair(std::uint64_t seed, const FactorSpace& space, std::size_t size) {
  const std::uint64_t glyph_seed = derive_seed(seed, 0x9e37);
  auto pair = affine_pair_from_image(render_glyph(glyph_seed, size), seed, space);
  pair.content_seed = glyph_seed;
  return pair;
}

// ---- scenes ---------------------------------------------------------------------------

FactorDef scene_factor(const std::string& name, std::size_t extent, bool transform) {
  FactorDef f;
  f.name = name;
  f.extent = extent;
  f.transform = transform;
  if (name == "floorColour" || name == "wallColour" || name == "objectColour") {
    f.periodic = true;
    f.lo = 0.0;
    f.hi = 1.0;
  } else if (name == "scale") {
    f.periodic = false;
    f.lo = 1.0 / 1.9;
    f.hi = 1.0;
  } else if (name == "shape") {
    f.periodic = false;
    f.lo = 0.0;
    f.hi = 3.0;
  } else if (name == "orientation") {
    f.periodic = true;
    f.lo = 0.0;
    f.hi = 2.0 * std::numbers::pi;
  } else {
    throw ContractError("unknown scene factor '" + name + "'");
  }
  return f;
}

FactorSpace default_scene_space() {
  FactorSpace s;
  const std::size_t extents[] = {10, 10, 10, 8, 4, 15};
  for (std::size_t i = 0; i < 6; ++i) s.factors.push_back(scene_factor(kSceneFactorNames[i], extents[i]));
  return s;
}

SceneState scene_state(const FactorSpace& space, const std::vector<std::size_t>& indices) {
  require(indices.size() == space.factors.size(), "scene_state: index arity mismatch");
  require(space.factors.size() <= 6, "scene spaces have at most 6 factors");
  SceneState st;
  for (std::size_t i = 0; i < space.factors.size(); ++i) {
    const auto& f = space.factors[i];
    const double v = dequantise_param(indices[i], f);
    if (f.name == "floorColour")
      st.floor_hue = v;
    else if (f.name == "wallColour")
      st.wall_hue = v;
    else if (f.name == "objectColour")
      st.object_hue = v;
    else if (f.name == "scale")
      st.scale = v;
    else if (f.name == "shape")
      st.shape = static_cast<std::size_t>(std::clamp<long>(std::lround(v), 0, 3));
    else if (f.name == "orientation")
      st.orientation = v;
    else
      throw ContractError("scene renderer has no factor named '" + f.name + "'");
  }
  return st;
}

namespace {

std::array<float, 3> hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r, g, b;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

// Object-space membership; (u, v) in units of the sprite radius.
bool inside_shape(std::size_t shape, double u, double v) {
  switch (shape) {
    case 0: return std::abs(u) <= 0.72 && std::abs(v) <= 0.72;   // cube: square
    case 1: return std::abs(u) <= 0.45 && std::abs(v) <= 0.95;   // cylinder: tall rectangle
    case 2: return u * u + v * v <= 0.85 * 0.85;                  // sphere: disk
    default: return segment_distance(u, v, 0.0, -0.55, 0.0, 0.55) <= 0.4;  // capsule: stadium
  }
}

}  // namespace

std::size_t scene_horizon(std::size_t size) { return size * 11 / 16; }

std::string hue_name(double hue) {
  static const char* names[] = {"red", "orange", "yellow", "lime", "green", "cyan", "azure", "blue", "violet", "magenta"};
  hue -= std::floor(hue);
  return names[static_cast<std::size_t>(std::lround(hue * 10.0)) % 10];
}

Image render_scene(const SceneState& st, std::size_t size) {
  const auto floor = hsv(st.floor_hue, 0.55, 0.6);
  const auto wall = hsv(st.wall_hue, 0.5, 0.85);
  const auto object = hsv(st.object_hue, 0.9, 1.0);
  const std::size_t horizon = scene_horizon(size);
  const double cx = (static_cast<double>(size) - 1.0) / 2.0, cy = 0.44 * static_cast<double>(size);
  const double radius = 9.0 * static_cast<double>(size) / 32.0 * st.scale;
  const double co = std::cos(st.orientation), so = std::sin(st.orientation);
  Image img({3, size, size});
  constexpr int ss = 4;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const auto& bg = y >= horizon ? floor : wall;
      int hit = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / ss - 0.5 - cx;
          const double py = static_cast<double>(y) + (sy + 0.5) / ss - 0.5 - cy;
          const double u = (co * px + so * py) / radius, v = (-so * px + co * py) / radius;
          hit += inside_shape(st.shape, u, v);
        }
      const float a = static_cast<float>(hit) / (ss * ss);
      for (std::size_t ch = 0; ch < 3; ++ch) img[(ch * size + y) * size + x] = a * object[ch] + (1.0f - a) * bg[ch];
    }
  return img;
}

SamplePair synth_scene_pair(std::uint64_t seed, const FactorSpace& space, std::size_t size) {
  space.validate();
  std::mt19937_64 rng(seed);
  const auto d = draw_indices(space, rng);
  SamplePair pair;
  pair.source_indices = d.source;
  pair.offset = d.offset;
  pair.target_indices = apply_offset_to_indices(space, d.source, d.offset);
  pair.source = render_scene(scene_state(space, pair.source_indices), size);
  pair.target = render_scene(scene_state(space, pair.target_indices), size);
  pair.content_seed = seed;
  return pair;
}

std::vector<std::vector<std::size_t>> enumerate_states(const FactorSpace& space) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> idx(space.factors.size(), 0);
  const std::size_t total = space.state_count();
  out.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rem = n;
    for (std::size_t i = idx.size(); i-- > 0;) {
      idx[i] = rem % space.factors[i].extent;
      rem /= space.factors[i].extent;
    }
    out.push_back(idx);
  }
  return out;
}

// ---- hold-out -------------------------------------------------------------------------

Combination parse_combination(const FactorSpace& space, const std::string& text) {
  Combination out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, end - start);
    const auto eq = item.find('=');
    require(eq != std::string::npos && eq > 0 && eq + 1 < item.size(), "combination item '" + item + "' is not name=value");
    const auto name = item.substr(0, eq), value = item.substr(eq + 1);
    const auto& f = space.factors.at(space.index(name));
    std::optional<std::size_t> index;
    if (value.find_first_not_of("0123456789") == std::string::npos) index = std::stoul(value);
    for (std::size_t i = 0; !index && i < f.extent; ++i) {
      const double v = dequantise_param(i, f);
      if (name == "shape" && kShapeNames[std::clamp<long>(std::lround(v), 0, 3)] == value) index = i;
      if (name.ends_with("Colour") && hue_name(v) == value) index = i;
    }
    require(index && *index < f.extent, "no bin of '" + name + "' matches '" + value + "'");
    out.push_back({name, *index});
    start = end + 1;
  }
  return out;
}

bool hits(const FactorSpace& space, const std::vector<std::size_t>& indices, const Combination& combo) {
  for (const auto& fv : combo)
    if (indices.at(space.index(fv.factor)) != fv.index) return false;
  return true;
}

HoldoutSplit split_holdout(const std::vector<SamplePair>& pairs, const FactorSpace& space, const Combination& combo) {
  require(!combo.empty(), "split_holdout: empty combination");
  for (const auto& fv : combo)
    require(fv.index < space.factors[space.index(fv.factor)].extent,
            "split_holdout: index out of range for '" + fv.factor + "'");
  HoldoutSplit split;
  for (const auto& p : pairs) {
    const bool src = hits(space, p.source_indices, combo), tgt = hits(space, p.target_indices, combo);
    if (tgt)
      split.test.push_back(p);
    else if (!src)
      split.train.push_back(p);
  }
  require(!split.test.empty(), "split_holdout: no pair targets the excluded combination");
  return split;
}

// ---- datasets ---------------------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PairDataset generate_dataset(const std::string& generator, const FactorSpace& space, std::uint64_t seed,
                             std::size_t count, std::size_t image_size) {
  require(generator == "affine" || generator == "scene", "unknown generator '" + generator + "'");
  space.validate();
  PairDataset ds{generator, space, seed, image_size, std::vector<SamplePair>(count)};
  const long n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    ds.pairs[static_cast<std::size_t>(i)] =
        generator == "affine" ? synth_affine_pair(s, space, image_size) : synth_scene_pair(s, space, image_size);
  }
  return ds;
}

PairDataset generate_dataset_from_images(const std::vector<Image>& bases, const FactorSpace& space, std::uint64_t seed,
                                         std::size_t count, std::size_t image_size) {
  require(!bases.empty(), "no base images");
  PairDataset ds{"idx-affine", space, seed, image_size, std::vector<SamplePair>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    const auto s = derive_seed(seed, i);
    const auto& base = bases[s % bases.size()];
    ds.pairs[i] = affine_pair_from_image(center_canvas(base, image_size, image_size), s, space);
    ds.pairs[i].content_seed = s % bases.size();
  }
  return ds;
}

void save_dataset(const PairDataset& ds, const std::filesystem::path& manifest) {
  require(!ds.pairs.empty(), "save_dataset: empty dataset");
  const auto& shape = ds.pairs.front().source.shape();
  auto blob_path = manifest;
  blob_path.replace_extension(".bin");
  json pairs = json::array();
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + blob_path.string());
  for (const auto& p : ds.pairs) {
    for (const Image* img : {&p.source, &p.target}) {
      require(img->shape() == shape, "save_dataset: images must share a shape");
      const auto bytes = to_interleaved_bytes(*img);
      blob.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    pairs.push_back({{"offset", p.offset.components},
                     {"source", p.source_indices},
                     {"target", p.target_indices},
                     {"content_seed", p.content_seed}});
  }
  json j = {{"format", "qtae-pairs"},
            {"version", 1},
            {"generator", ds.generator},
            {"seed", ds.seed},
            {"count", ds.pairs.size()},
            {"image", {{"channels", shape[0]}, {"height", shape[1]}, {"width", shape[2]}}},
            {"space", ds.space},
            {"blob", blob_path.filename().string()},
            {"layout", "u8, per pair source then target, each HxWxC row-major with interleaved channels"},
            {"pairs", pairs}};
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  out << j.dump(2) << "\n";
}

PairDataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("dataset manifest is not JSON: ") + e.what(), e.byte);
  }
  require(j.value("format", "") == "qtae-pairs", "not a qtae-pairs manifest: " + manifest.string());
  PairDataset ds;
  ds.generator = j.at("generator").get<std::string>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.space = j.at("space").get<FactorSpace>();
  const std::size_t c = j.at("image").at("channels"), h = j.at("image").at("height"), w = j.at("image").at("width");
  ds.image_size = h;
  const auto blob_path = manifest.parent_path() / j.at("blob").get<std::string>();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + blob_path.string());
  const std::size_t per = c * h * w;
  std::vector<std::uint8_t> bytes(per);
  std::size_t offset = 0;
  for (const auto& pj : j.at("pairs")) {
    SamplePair p;
    p.offset.components = pj.at("offset").get<std::vector<std::int64_t>>();
    p.source_indices = pj.at("source").get<std::vector<std::size_t>>();
    p.target_indices = pj.at("target").get<std::vector<std::size_t>>();
    p.content_seed = pj.value("content_seed", std::uint64_t{0});
    for (Image* img : {&p.source, &p.target}) {
      blob.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(per));
      if (static_cast<std::size_t>(blob.gcount()) != per)
        throw FormatError("dataset blob truncated: " + blob_path.string(), offset + static_cast<std::size_t>(blob.gcount()));
      *img = from_interleaved_bytes(bytes.data(), c, h, w);
      offset += per;
    }
    ds.pairs.push_back(std::move(p));
  }
  require(ds.pairs.size() == j.at("count").get<std::size_t>(), "dataset manifest count does not match its pairs");
  return ds;
}

// ---- IDX --------------------------------------------------------------------------

std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes) {
  auto be32 = [&](std::size_t at) {
    if (at + 4 > bytes.size()) throw FormatError("IDX header truncated", bytes.size());
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) | (std::uint32_t{bytes[at + 2]} << 8) |
           std::uint32_t{bytes[at + 3]};
  };
  const std::uint32_t magic = be32(0);
  if (magic != 0x00000803) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw FormatError(std::string("IDX image magic must be 0x00000803, found ") + buf, 0);
  }
  const std::size_t count = be32(4), rows = be32(8), cols = be32(12);
  if (rows == 0 || cols == 0) throw FormatError("IDX image extents must be positive", 8);
  const std::size_t per = rows * cols;
  constexpr std::size_t header = 16;
  if (bytes.size() < header + count * per)
    throw FormatError("IDX pixel data truncated: expected " + std::to_string(count * per) + " bytes", bytes.size());
  std::vector<Image> images;
  images.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Image img({1, rows, cols});
    for (std::size_t i = 0; i < per; ++i) img[i] = static_cast<float>(bytes[header + n * per + i]) / 255.0f;
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<Image> load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx_images(bytes);
}

}  // namespace qtae
