// SPDX-License-Identifier: Apache-2.0
//
// Positioning metrics, CDF tables and region-map export.

#pragma once

#include "amdn/dataset_io.hpp"
#include "amdn/fusion.hpp"
#include "amdn/geometry.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amdn {

struct ErrorSummary {
  double mean_m = 0.0;  // mean Euclidean error
  double rmse_m = 0.0;
  double mse_m2 = 0.0;  // mean squared Euclidean error
  std::size_t count = 0;
};

inline std::vector<double> euclidean_errors(std::span<const Vec2> preds, std::span<const Vec2> truths) {
  if (preds.size() != truths.size()) throw std::invalid_argument("euclidean_errors: length mismatch");
  std::vector<double> e(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) e[i] = distance(preds[i], truths[i]);
  return e;
}

inline ErrorSummary summarize_errors(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("mean_error: no samples");
  ErrorSummary s;
  s.count = errors.size();
  for (double e : errors) {
    s.mean_m += e;
    s.mse_m2 += e * e;
  }
  s.mean_m /= static_cast<double>(errors.size());
  s.mse_m2 /= static_cast<double>(errors.size());
  s.rmse_m = std::sqrt(s.mse_m2);
  return s;
}

inline ErrorSummary mean_error(std::span<const Vec2> preds, std::span<const Vec2> truths) {
  if (preds.empty()) throw std::invalid_argument("mean_error: no samples");
  const auto e = euclidean_errors(preds, truths);
  return summarize_errors(e);
}

struct CdfPoint {
  double threshold_m = 0.0;
  double fraction = 0.0;
};

/// Fraction of errors <= t for every threshold.
inline std::vector<CdfPoint> cdf_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw std::invalid_argument("cdf_curve: no errors");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, static_cast<double>(n) / static_cast<double>(sorted.size())});
  }
  return out;
}

/// 0, step, 2 step, ... up to the largest error, which is always the last threshold.
inline std::vector<double> default_thresholds(std::span<const double> errors, double step = 0.5) {
  const double hi = errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end());
  std::vector<double> t;
  for (int i = 0; static_cast<double>(i) * step < hi; ++i) t.push_back(static_cast<double>(i) * step);
  t.push_back(hi);
  return t;
}

// Region maps

using Rgb = std::array<std::uint8_t, 3>;

/// Stable label color (golden-ratio hue walk); never black or white.
inline Rgb label_color(int label) {
  const double hue = std::fmod(static_cast<double>(label) * 0.618033988749895, 1.0) * 6.0;
  const double s = 0.65;
  const double v = 0.9;
  const int sector = static_cast<int>(hue) % 6;
  const double f = hue - std::floor(hue);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::lround(x * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

inline constexpr Rgb kRemovedColor{0, 0, 0};
inline constexpr Rgb kBackgroundColor{255, 255, 255};

struct RasterSpec {
  Vec2 area_m{250.0, 250.0};
  double cell_m = 1.0;
  double max_dist_m = 7.5;  // pixels farther than this from every sample stay background
};

struct RegionRaster {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major, row 0 is the top (largest y)

  [[nodiscard]] Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

/// Colors each pixel after its nearest sample (lowest index on ties).
inline RegionRaster rasterize_regions(std::span<const Vec2> positions, std::span<const int> fused_label,
                                      const std::vector<bool>& retained, const RasterSpec& spec) {
  if (positions.size() != fused_label.size() || positions.size() != retained.size())
    throw std::invalid_argument("rasterize_regions: length mismatch");
  if (!(spec.cell_m > 0.0)) throw std::invalid_argument("rasterize_regions: cell size must be > 0");
  RegionRaster r;
  r.width = static_cast<int>(std::ceil(spec.area_m.x / spec.cell_m));
  r.height = static_cast<int>(std::ceil(spec.area_m.y / spec.cell_m));
  r.pixels.assign(static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height), kBackgroundColor);
  const double max_d2 = spec.max_dist_m * spec.max_dist_m;
  for (int py = 0; py < r.height; ++py)
    for (int px = 0; px < r.width; ++px) {
      const Vec2 c{(px + 0.5) * spec.cell_m, spec.area_m.y - (py + 0.5) * spec.cell_m};
      std::size_t best = positions.size();
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < positions.size(); ++i) {
        const Vec2 d = positions[i] - c;
        const double d2 = d.x * d.x + d.y * d.y;
        if (d2 < best_d2) {
          best_d2 = d2;
          best = i;
        }
      }
      if (best == positions.size() || best_d2 > max_d2) continue;
      r.pixels[static_cast<std::size_t>(py) * static_cast<std::size_t>(r.width) + static_cast<std::size_t>(px)] =
          retained[best] ? label_color(fused_label[best]) : kRemovedColor;
    }
  return r;
}

inline void write_ppm(const std::filesystem::path& file, const RegionRaster& r) {
  auto os = detail::open_out(file, true);
  os << "P6\n" << r.width << ' ' << r.height << "\n255\n";
  for (const auto& p : r.pixels) os.write(reinterpret_cast<const char*>(p.data()), 3);
}

/// id,x,y,fused_label,retained
inline void write_region_xy_csv(const std::filesystem::path& file, std::span<const int> ids, std::span<const Vec2> positions,
                                const RegionLabels& labels) {
  auto os = detail::open_out(file);
  os << "id,x,y,fused_label,retained\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    os << ids[i] << ',' << format_double(positions[i].x) << ',' << format_double(positions[i].y) << ','
       << labels.fused_label[i] << ',' << (labels.retained[i] ? 1 : 0) << '\n';
}

inline void export_region_map(const std::filesystem::path& csv, const std::filesystem::path& ppm, std::span<const int> ids,
                              std::span<const Vec2> positions, const RegionLabels& labels, const RasterSpec& spec) {
  write_region_xy_csv(csv, ids, positions, labels);
  write_ppm(ppm, rasterize_regions(positions, labels.fused_label, labels.retained, spec));
}

/// region_map.csv: id,cfr_label,adcam_label,fused_label,retained
inline void write_region_map_csv(const std::filesystem::path& file, std::span<const int> ids, const RegionLabels& labels) {
  auto os = detail::open_out(file);
  os << "id,cfr_label,adcam_label,fused_label,retained\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    os << ids[i] << ',' << labels.cfr_label[i] << ',' << labels.adcam_label[i] << ',' << labels.fused_label[i] << ','
       << (labels.retained[i] ? 1 : 0) << '\n';
}

struct RegionMapFile {
  std::vector<int> ids;
  RegionLabels labels;
};

inline RegionMapFile read_region_map_csv(const std::filesystem::path& file) {
  auto is = detail::open_in(file);
  std::string line;
  std::getline(is, line);
  if (line != "id,cfr_label,adcam_label,fused_label,retained")
    throw std::runtime_error(file.string() + ": unexpected header '" + line + "'");
  RegionMapFile out;
  std::size_t kept = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv(line);
    if (c.size() != 5) throw std::runtime_error(file.string() + ": malformed row '" + line + "'");
    out.ids.push_back(std::stoi(c[0]));
    out.labels.cfr_label.push_back(std::stoi(c[1]));
    out.labels.adcam_label.push_back(std::stoi(c[2]));
    const int fused = std::stoi(c[3]);
    const bool keep = c[4] == "1";
    out.labels.fused_label.push_back(fused);
    out.labels.retained.push_back(keep);
    if (keep) {
      ++kept;
      out.labels.fused_count = std::max(out.labels.fused_count, fused + 1);
    }
  }
  out.labels.covering_rate = out.ids.empty() ? 1.0 : static_cast<double>(kept) / static_cast<double>(out.ids.size());
  return out;
}

}  // namespace amdn
