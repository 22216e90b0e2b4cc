#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>

namespace aevac {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

  constexpr bool operator==(const Vec2&) const = default;
  constexpr auto operator<=>(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 3D cross product; > 0 when b is counter-clockwise of a.
constexpr double det(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double abs_sq(Vec2 v) { return dot(v, v); }
inline double length(Vec2 v) { return std::sqrt(abs_sq(v)); }
inline double distance(Vec2 a, Vec2 b) { return length(a - b); }
inline Vec2 normalize(Vec2 v) {
  const double l = length(v);
  return l > 0.0 ? v / l : Vec2{};
}
/// Counter-clockwise quarter turn.
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Lattice used for exact geometric predicates (1 micrometre).
inline constexpr double kLatticePerMetre = 1e6;
inline double snap_to_lattice(double v) { return std::round(v * kLatticePerMetre) / kLatticePerMetre; }

/// Twice the signed area of (a, b, c); positive for a counter-clockwise turn.
constexpr double orient(Vec2 a, Vec2 b, Vec2 c) { return det(b - a, c - a); }

/// Axis-aligned rectangle, lo <= hi componentwise.
struct Rect {
  Vec2 lo;
  Vec2 hi;

  constexpr double width() const { return hi.x - lo.x; }
  constexpr double height() const { return hi.y - lo.y; }
  constexpr double area() const { return width() * height(); }
  constexpr Vec2 center() const { return (lo + hi) * 0.5; }

  constexpr bool contains_closed(Vec2 p, double eps = 0.0) const {
    return p.x >= lo.x - eps && p.x <= hi.x + eps && p.y >= lo.y - eps && p.y <= hi.y + eps;
  }
  constexpr bool contains_open(Vec2 p, double eps = 0.0) const {
    return p.x > lo.x + eps && p.x < hi.x - eps && p.y > lo.y + eps && p.y < hi.y - eps;
  }
  constexpr Rect shrunk(double d) const { return {{lo.x + d, lo.y + d}, {hi.x - d, hi.y - d}}; }
  constexpr bool overlaps_open(const Rect& o) const {
    return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y;
  }

  constexpr bool operator==(const Rect&) const = default;
  constexpr auto operator<=>(const Rect&) const = default;
};

inline double distance_to_rect(Vec2 p, const Rect& r) {
  const double dx = std::max({r.lo.x - p.x, 0.0, p.x - r.hi.x});
  const double dy = std::max({r.lo.y - p.y, 0.0, p.y - r.hi.y});
  return std::sqrt(dx * dx + dy * dy);
}

inline double distance_to_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = abs_sq(ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

/// True iff the closed segment a-b meets the open interior of r (Liang-Barsky clip).
inline bool segment_hits_rect_interior(Vec2 a, Vec2 b, const Rect& r) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  const double p[4] = {-d.x, d.x, -d.y, d.y};
  const double q[4] = {a.x - r.lo.x, r.hi.x - a.x, a.y - r.lo.y, r.hi.y - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      // Parallel to this slab; must be strictly inside it.
      if (q[i] <= 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 >= t1) return false;
  }
  // Non-empty parameter interval: the open slab intersection is crossed with positive length,
  // or the segment touches the interior at a single point strictly inside.
  const Vec2 mid = a + d * (0.5 * (t0 + t1));
  return r.contains_open(mid);
}

}  // namespace aevac
