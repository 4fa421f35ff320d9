// SPDX-License-Identifier: Apache-2.0
//
// Synthetic urban scenes: one BS with a ULA along the x axis, axis-aligned
// buildings and a grid of MTs. Paths are the LOS ray plus first-order specular
// reflections found with the image method.

#pragma once

#include "amdn/channel.hpp"
#include "amdn/geometry.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amdn {

inline constexpr double kSpeedOfLight = 299792458.0;

struct GridSpec {
  double spacing_m = 10.0;
  double jitter = 0.0;  // fraction of spacing, in [0, 0.5]
};

struct SceneConfig {
  Vec2 area_m{250.0, 250.0};
  Vec2 bs_pos{125.0, 125.0};
  std::vector<Rect> buildings;
  GridSpec mt_grid;
  double carrier_hz = 60e9;
  double bandwidth_hz = 0.05e9;
  std::size_t nc = 64;
  std::size_t nt = 64;
  std::size_t maxpathnum = 10;
  double reflection_loss_db = 6.0;
  double spacing_ratio = 0.5;
  double snr_db = kNoNoise;
  std::uint64_t seed = 1;

  [[nodiscard]] double wavelength() const { return kSpeedOfLight / carrier_hz; }
  [[nodiscard]] double sample_length_m() const { return kSpeedOfLight / bandwidth_hz; }

  [[nodiscard]] bool inside_area(Vec2 p) const {
    return p.x >= 0.0 && p.x <= area_m.x && p.y >= 0.0 && p.y <= area_m.y;
  }
  [[nodiscard]] bool inside_building(Vec2 p) const {
    return std::any_of(buildings.begin(), buildings.end(), [&](const Rect& r) { return r.contains_closed(p); });
  }

  void validate() const {
    if (!(area_m.x > 0.0 && area_m.y > 0.0)) throw std::invalid_argument("scene: area must be positive");
    for (const auto& b : buildings) {
      if (!(b.w > 0.0 && b.h > 0.0)) throw std::invalid_argument("scene: building with non-positive size");
      if (b.x < 0.0 || b.y < 0.0 || b.x1() > area_m.x || b.y1() > area_m.y)
        throw std::invalid_argument("scene: building outside the area");
    }
    if (!inside_area(bs_pos)) throw std::invalid_argument("scene: bs_pos outside the area");
    if (inside_building(bs_pos)) throw std::invalid_argument("scene: bs_pos inside a building");
    if (maxpathnum < 1) throw std::invalid_argument("scene: maxpathnum must be >= 1");
    if (nt < 1 || nc < 1) throw std::invalid_argument("scene: nt and nc must be >= 1");
    if (!(mt_grid.spacing_m > 0.0)) throw std::invalid_argument("scene: grid spacing must be > 0");
    if (!(mt_grid.jitter >= 0.0 && mt_grid.jitter <= 0.5)) throw std::invalid_argument("scene: jitter must be in [0, 0.5]");
    if (!(carrier_hz > 0.0 && bandwidth_hz > 0.0)) throw std::invalid_argument("scene: frequencies must be > 0");
    if (!(reflection_loss_db >= 0.0)) throw std::invalid_argument("scene: reflection_loss_db must be >= 0");
    if (!(spacing_ratio > 0.0)) throw std::invalid_argument("scene: spacing_ratio must be > 0");
  }
};

struct Sample {
  int id = 0;
  Vec2 pos;
  std::vector<PathRecord> paths;
  bool is_los = false;
  CfrMatrix cfr;
  AdcamMatrix adcam;
};

struct TraceResult {
  std::vector<PathRecord> paths;
  bool is_los = false;
};

namespace detail {

inline double axis_angle(Vec2 dir) {
  constexpr double eps = 1e-6;
  const double len = dir.norm();
  const double c = std::clamp(dir.x / len, -1.0, 1.0);
  return std::clamp(std::acos(c), eps, std::numbers::pi - eps);
}

struct RawPath {
  PathRecord rec;
  double length = 0.0;
  int order = 0;  // discovery order, for stable tie-breaking
};

inline bool segment_clear(Vec2 a, Vec2 b, const std::vector<Rect>& buildings) {
  return std::none_of(buildings.begin(), buildings.end(), [&](const Rect& r) { return segment_blocked(a, b, r); });
}

}  // namespace detail

/// Builds a path record from geometry; `first` is the first point after the BS
/// and `last` the last point before the MT (both equal the other end for LOS).
inline PathRecord make_path(const SceneConfig& scene, Vec2 mt, Vec2 first, Vec2 last, double length, int bounces) {
  PathRecord p;
  p.aoa = detail::axis_angle(first - scene.bs_pos);
  p.aod = detail::axis_angle(last - mt);
  p.gain = std::polar(1.0, 2.0 * std::numbers::pi * length / scene.wavelength());
  const double fspl = 20.0 * std::log10(4.0 * std::numbers::pi * length / scene.wavelength());
  p.pathloss_db = std::max(0.0, fspl) + scene.reflection_loss_db * bounces;
  const double delay = std::round(length / scene.sample_length_m());
  p.delay_samples = static_cast<std::uint32_t>(std::clamp(delay, 0.0, static_cast<double>(scene.nc - 1)));
  return p;
}

/// Specular reflection point of bs->mt on the wall, if the image ray hits the
/// open wall segment with both endpoints on the exterior side.
inline std::optional<Vec2> reflection_point(Vec2 bs, Vec2 mt, const Wall& w) {
  if (!(exterior_offset(bs, w) > 0.0 && exterior_offset(mt, w) > 0.0)) return std::nullopt;
  const Vec2 img = mirror(bs, w);
  const double from = w.vertical ? img.x : img.y;
  const double to = w.vertical ? mt.x : mt.y;
  const double t = (w.coord - from) / (to - from);
  const Vec2 r = img + (mt - img) * t;
  if (w.vertical) {
    if (!(r.y > w.a.y && r.y < w.b.y)) return std::nullopt;
    return Vec2{w.coord, r.y};
  }
  if (!(r.x > w.a.x && r.x < w.b.x)) return std::nullopt;
  return Vec2{r.x, w.coord};
}

/// Traces LOS plus first-order reflections from the BS to `mt`. The strongest
/// `maxpathnum` paths (lowest pathloss) are kept and returned by ascending delay.
inline TraceResult trace_paths(const SceneConfig& scene, Vec2 mt) {
  if (!scene.inside_area(mt)) throw std::invalid_argument("trace_paths: MT outside the area");
  if (scene.inside_building(mt)) throw std::invalid_argument("trace_paths: MT inside a building");
  if (distance(mt, scene.bs_pos) < 1e-9) throw std::invalid_argument("trace_paths: MT coincides with the BS");

  std::vector<detail::RawPath> raw;
  int order = 0;
  bool los = false;
  if (detail::segment_clear(scene.bs_pos, mt, scene.buildings)) {
    const double len = distance(scene.bs_pos, mt);
    raw.push_back({make_path(scene, mt, mt, scene.bs_pos, len, 0), len, order++});
    los = true;
  }
  for (const auto& b : scene.buildings) {
    for (const auto& w : walls_of(b)) {
      const auto r = reflection_point(scene.bs_pos, mt, w);
      if (!r) continue;
      if (!detail::segment_clear(scene.bs_pos, *r, scene.buildings) || !detail::segment_clear(*r, mt, scene.buildings))
        continue;
      const double len = distance(scene.bs_pos, *r) + distance(*r, mt);
      raw.push_back({make_path(scene, mt, *r, *r, len, 1), len, order++});
    }
  }

  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    if (a.rec.pathloss_db != b.rec.pathloss_db) return a.rec.pathloss_db < b.rec.pathloss_db;
    return a.order < b.order;
  });
  if (raw.size() > scene.maxpathnum) raw.resize(scene.maxpathnum);
  los = los && std::any_of(raw.begin(), raw.end(), [](const auto& p) { return p.order == 0; });
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.order < b.order;
  });

  TraceResult out;
  out.is_los = los;
  out.paths.reserve(raw.size());
  for (const auto& r : raw) out.paths.push_back(r.rec);
  return out;
}

/// MT positions of the grid in row-major order (y outer, x inner), cell centers
/// plus optional seeded jitter. Index in the returned vector is the sample id.
inline std::vector<Vec2> grid_positions(const SceneConfig& scene) {
  const auto nx = static_cast<std::size_t>(std::floor(scene.area_m.x / scene.mt_grid.spacing_m));
  const auto ny = static_cast<std::size_t>(std::floor(scene.area_m.y / scene.mt_grid.spacing_m));
  const double s = scene.mt_grid.spacing_m;
  std::mt19937_64 rng(scene.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec2> pts;
  pts.reserve(nx * ny);
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix) {
      Vec2 p{s * (static_cast<double>(ix) + 0.5), s * (static_cast<double>(iy) + 0.5)};
      if (scene.mt_grid.jitter > 0.0) {
        const double jx = u(rng);
        const double jy = u(rng);
        p.x = std::clamp(p.x + jx * scene.mt_grid.jitter * s, 0.0, scene.area_m.x);
        p.y = std::clamp(p.y + jy * scene.mt_grid.jitter * s, 0.0, scene.area_m.y);
      }
      pts.push_back(p);
    }
  return pts;
}

/// Fills cfr/adcam of a sample from its paths (with noise when the scene sets an SNR).
inline void synthesize_fingerprint(const SceneConfig& scene, Sample& s) {
  s.cfr = cfr_from_paths(s.paths, scene.nt, scene.nc, scene.spacing_ratio);
  if (std::isfinite(scene.snr_db))
    s.cfr = add_noise(s.cfr, scene.snr_db, scene.seed * 1000003ULL + static_cast<std::uint64_t>(s.id));
  s.adcam = adcam(s.cfr);
}

inline std::vector<Sample> build_dataset(const SceneConfig& scene) {
  scene.validate();
  std::vector<Sample> out;
  const auto pts = grid_positions(scene);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 p = pts[i];
    if (scene.inside_building(p) || distance(p, scene.bs_pos) < 1e-9) continue;
    auto tr = trace_paths(scene, p);
    if (tr.paths.empty()) continue;  // unreachable
    Sample s;
    s.id = static_cast<int>(i);
    s.pos = p;
    s.paths = std::move(tr.paths);
    s.is_los = tr.is_los;
    synthesize_fingerprint(scene, s);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::runtime_error("build_dataset: no reachable MT in the scene");
  return out;
}

enum class LosMode { nlos_only, all };

inline LosMode parse_los_mode(std::string_view s) {
  if (s == "nlos_only") return LosMode::nlos_only;
  if (s == "all") return LosMode::all;
  throw std::invalid_argument("unknown LOS mode '" + std::string(s) + "' (expected nlos_only or all)");
}

inline const char* to_string(LosMode m) { return m == LosMode::nlos_only ? "nlos_only" : "all"; }

inline std::vector<Sample> nlos_filter(std::vector<Sample> samples, LosMode mode) {
  if (mode == LosMode::nlos_only)
    std::erase_if(samples, [](const Sample& s) { return s.is_los; });
  if (samples.empty()) throw std::runtime_error("nlos_filter: no samples left");
  return samples;
}

// scene.json

inline void to_json(nlohmann::json& j, const SceneConfig& s) {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& r : s.buildings) b.push_back({{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}});
  j = {
      {"area_m", {s.area_m.x, s.area_m.y}},
      {"bs_pos", {s.bs_pos.x, s.bs_pos.y}},
      {"buildings", b},
      {"mt_grid", {{"spacing_m", s.mt_grid.spacing_m}, {"jitter", s.mt_grid.jitter}}},
      {"carrier_hz", s.carrier_hz},
      {"bandwidth_hz", s.bandwidth_hz},
      {"nc", s.nc},
      {"nt", s.nt},
      {"maxpathnum", s.maxpathnum},
      {"reflection_loss_db", s.reflection_loss_db},
      {"spacing_ratio", s.spacing_ratio},
      {"seed", s.seed},
  };
  if (std::isfinite(s.snr_db)) {
    j["snr_db"] = s.snr_db;
  } else {
    j["snr_db"] = nullptr;
  }
}

inline void from_json(const nlohmann::json& j, SceneConfig& s) {
  s = SceneConfig{};
  auto pair = [](const nlohmann::json& v) { return Vec2{v.at(0).get<double>(), v.at(1).get<double>()}; };
  if (j.contains("area_m")) s.area_m = pair(j.at("area_m"));
  s.bs_pos = j.contains("bs_pos") ? pair(j.at("bs_pos")) : Vec2{s.area_m.x / 2, s.area_m.y / 2};
  if (j.contains("buildings"))
    for (const auto& b : j.at("buildings")) {
      if (b.is_array()) {
        s.buildings.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()});
      } else {
        s.buildings.push_back({b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(),
                               b.at("h").get<double>()});
      }
    }
  if (j.contains("mt_grid")) {
    const auto& g = j.at("mt_grid");
    s.mt_grid.spacing_m = g.value("spacing_m", s.mt_grid.spacing_m);
    s.mt_grid.jitter = g.value("jitter", s.mt_grid.jitter);
  }
  s.carrier_hz = j.value("carrier_hz", s.carrier_hz);
  s.bandwidth_hz = j.value("bandwidth_hz", s.bandwidth_hz);
  s.nc = j.value("nc", s.nc);
  s.nt = j.value("nt", s.nt);
  s.maxpathnum = j.value("maxpathnum", s.maxpathnum);
  s.reflection_loss_db = j.value("reflection_loss_db", s.reflection_loss_db);
  s.spacing_ratio = j.value("spacing_ratio", s.spacing_ratio);
  if (j.contains("snr_db") && !j.at("snr_db").is_null()) s.snr_db = j.at("snr_db").get<double>();
  s.seed = j.value("seed", s.seed);
}

}  // namespace amdn
