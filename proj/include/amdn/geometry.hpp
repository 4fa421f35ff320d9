// SPDX-License-Identifier: Apache-2.0
//
// 2D primitives for the ray tracer: points, axis-aligned buildings, segment
// clipping and mirror images.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

namespace amdn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Vec2&) const = default;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Axis-aligned rectangle; (x, y) is the lower-left corner.
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  [[nodiscard]] double x1() const { return x + w; }
  [[nodiscard]] double y1() const { return y + h; }

  /// Strict interior test; points on the boundary are outside.
  [[nodiscard]] bool contains_strict(Vec2 p) const { return p.x > x && p.x < x1() && p.y > y && p.y < y1(); }
  [[nodiscard]] bool contains_closed(Vec2 p) const {
    return p.x >= x && p.x <= x1() && p.y >= y && p.y <= y1();
  }

  bool operator==(const Rect&) const = default;
};

/// Parametric overlap [t0, t1] of segment a->b with the closed rectangle
/// (Liang-Barsky clipping), or nullopt when they are disjoint.
inline std::optional<std::array<double, 2>> clip_segment(Vec2 a, Vec2 b, const Rect& r) {
  const Vec2 d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  const std::array<double, 4> p{-d.x, d.x, -d.y, d.y};
  const std::array<double, 4> q{a.x - r.x, r.x1() - a.x, a.y - r.y, r.y1() - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return std::nullopt;
  }
  return std::array<double, 2>{t0, t1};
}

/// True when the segment runs through the rectangle over a nonzero length.
/// Touching a corner or ending on a wall does not count as blocking.
inline bool segment_blocked(Vec2 a, Vec2 b, const Rect& r) {
  const auto clip = clip_segment(a, b, r);
  if (!clip) return false;
  const double len = distance(a, b);
  return ((*clip)[1] - (*clip)[0]) * len > 1e-9;
}

/// One wall of a building: a segment on a line x = c (vertical) or y = c.
struct Wall {
  Vec2 a;
  Vec2 b;
  bool vertical = false;
  double coord = 0.0;  // x for vertical walls, y for horizontal
  double outward = 1.0;  // +1 when the exterior is on the increasing-coordinate side
};

inline std::array<Wall, 4> walls_of(const Rect& r) {
  return {{
      {{r.x, r.y}, {r.x, r.y1()}, true, r.x, -1.0},
      {{r.x1(), r.y}, {r.x1(), r.y1()}, true, r.x1(), 1.0},
      {{r.x, r.y}, {r.x1(), r.y}, false, r.y, -1.0},
      {{r.x, r.y1()}, {r.x1(), r.y1()}, false, r.y1(), 1.0},
  }};
}

inline Vec2 mirror(Vec2 p, const Wall& w) {
  if (w.vertical) return {2.0 * w.coord - p.x, p.y};
  return {p.x, 2.0 * w.coord - p.y};
}

/// Signed offset of p from the wall line, positive on the exterior side.
inline double exterior_offset(Vec2 p, const Wall& w) {
  return w.outward * ((w.vertical ? p.x : p.y) - w.coord);
}

}  // namespace amdn
