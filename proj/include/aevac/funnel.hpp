#pragma once

// Funnel (string pulling) over an ordered portal list, with clearance.
//
// With zero clearance the result is the taut string: origin, the corner
// vertices it wraps, goal. With clearance c the funnel runs over portals
// shrunk by c at both ends to find candidate corners; the path is then the
// taut string around discs of radius c centred on the corners it wraps. Each arc is
// replaced by the vertices of its circumscribed polygon (steps of at most
// 15 degrees), so no segment enters a disc.

#include <cmath>
#include <numbers>
#include <vector>

#include "aevac/error.hpp"
#include "aevac/navmesh.hpp"
#include "aevac/vec2.hpp"

namespace aevac {

struct FunnelCorner {
  Vec2 position;
  std::uint32_t vertex;
  /// +1 when the corner is on the walker's left (path turns counter-clockwise around it).
  int side;
};

namespace detail {

struct FunnelPortal {
  Vec2 left, right;
  std::uint32_t left_vertex, right_vertex;
};

inline std::vector<FunnelCorner> funnel_corners(const PortalRoute& route, double clearance) {
  constexpr std::uint32_t kNoVertex = std::numeric_limits<std::uint32_t>::max();
  std::vector<FunnelPortal> portals;
  portals.push_back({route.origin, route.origin, kNoVertex, kNoVertex});
  for (const Portal& p : route.portals) {
    const double len = distance(p.left, p.right);
    if (len < 2.0 * clearance) throw RouteError("portal narrower than the walker");
    const Vec2 u = len > 0.0 ? (p.right - p.left) / len : Vec2{};
    portals.push_back({p.left + u * clearance, p.right - u * clearance, p.left_vertex, p.right_vertex});
  }
  portals.push_back({route.goal, route.goal, kNoVertex, kNoVertex});

  std::vector<FunnelCorner> corners;
  auto emit = [&](const FunnelPortal& p, bool left) {
    const std::uint32_t v = left ? p.left_vertex : p.right_vertex;
    if (v == kNoVertex) return;
    if (!corners.empty() && corners.back().vertex == v) return;
    const Portal* src = nullptr;
    for (const Portal& q : route.portals) {
      if ((left ? q.left_vertex : q.right_vertex) == v) { src = &q; break; }
    }
    corners.push_back({left ? src->left : src->right, v, left ? 1 : -1});
  };

  Vec2 apex = portals[0].left, left = portals[0].left, right = portals[0].right;
  std::size_t apex_i = 0, left_i = 0, right_i = 0;
  for (std::size_t i = 1; i < portals.size(); ++i) {
    const Vec2 l = portals[i].left, r = portals[i].right;
    // Right leg: accept r when it turns the leg counter-clockwise (narrows the funnel).
    if (orient(apex, right, r) >= 0.0) {
      if (apex == right || orient(apex, left, r) < 0.0) {
        right = r;
        right_i = i;
      } else {
        emit(portals[left_i], true);
        apex = left;
        apex_i = left_i;
        right = left = apex;
        right_i = left_i = apex_i;
        i = apex_i;
        continue;
      }
    }
    if (orient(apex, left, l) <= 0.0) {
      if (apex == left || orient(apex, right, l) > 0.0) {
        left = l;
        left_i = i;
      } else {
        emit(portals[right_i], false);
        apex = right;
        apex_i = right_i;
        right = left = apex;
        right_i = left_i = apex_i;
        i = apex_i;
        continue;
      }
    }
  }
  return corners;
}

/// Direction of the common tangent from circle (c1, r1) to circle (c2, r2); signed
/// radii put the centre on the left of travel when positive.
inline Vec2 tangent_direction(Vec2 c1, double r1, Vec2 c2, double r2) {
  const Vec2 d = c2 - c1;
  const double dr = r2 - r1;
  const double len2 = abs_sq(d);
  if (len2 <= dr * dr) return normalize(d);
  const double l = std::sqrt(len2 - dr * dr);
  return rotate(normalize(d), -std::atan2(dr, l));
}

}  // namespace detail

/// Waypoints from origin to goal along the portal corridor, keeping `clearance`
/// from every wrapped corner. Returns just [goal] when origin == goal.
inline std::vector<Vec2> funnel(const PortalRoute& route, double clearance) {
  if (clearance < 0.0) throw RouteError("clearance must be non-negative");
  if (route.origin == route.goal && route.portals.empty()) return {route.goal};
  const auto corners = detail::funnel_corners(route, clearance);

  std::vector<Vec2> out{route.origin};
  if (clearance == 0.0) {
    for (const auto& c : corners) out.push_back(c.position);
    out.push_back(route.goal);
    return out;
  }

  // Circle chain: origin (r = 0), corners (r = side * clearance), goal (r = 0).
  struct Circle { Vec2 c; double r; };
  std::vector<Circle> chain{{route.origin, 0.0}};
  for (const auto& c : corners) chain.push_back({c.position, c.side * clearance});
  chain.push_back({route.goal, 0.0});

  // The shrunk-portal funnel can report a corner the string does not actually
  // touch; such a corner shows up as a turn against its side and is dropped.
  std::vector<Vec2> seg_dir;
  for (;;) {
    seg_dir.assign(chain.size() - 1, Vec2{});
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      seg_dir[i] = detail::tangent_direction(chain[i].c, chain[i].r, chain[i + 1].c, chain[i + 1].r);
    }
    std::size_t drop = 0;
    for (std::size_t k = 1; k + 1 < chain.size() && drop == 0; ++k) {
      if (det(seg_dir[k - 1], seg_dir[k]) * chain[k].r < -1e-12 * clearance) drop = k;
    }
    if (drop == 0) break;
    chain.erase(chain.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  constexpr double kMaxStep = std::numbers::pi / 12.0;
  for (std::size_t k = 1; k + 1 < chain.size(); ++k) {
    const Circle& circ = chain[k];
    const int side = circ.r > 0.0 ? 1 : -1;
    // Tangent points: T = C - r * perp(d).
    const Vec2 t_in = circ.c - perp(seg_dir[k - 1]) * circ.r;
    const Vec2 t_out = circ.c - perp(seg_dir[k]) * circ.r;
    const double a_in = std::atan2(t_in.y - circ.c.y, t_in.x - circ.c.x);
    const double a_out = std::atan2(t_out.y - circ.c.y, t_out.x - circ.c.x);
    double sweep = side > 0 ? a_out - a_in : a_in - a_out;
    sweep = std::fmod(sweep + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
    if (sweep > 2.0 * std::numbers::pi - 1e-7) sweep = 0.0;
    if (sweep < 1e-9) {
      out.push_back(t_in);
      continue;
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(sweep / kMaxStep - 1e-9)));
    const double delta = sweep / steps;
    const double radius = clearance / std::cos(0.5 * delta);
    for (int j = 0; j < steps; ++j) {
      const double a = a_in + side * (j + 0.5) * delta;
      out.push_back(circ.c + Vec2{std::cos(a), std::sin(a)} * radius);
    }
  }
  out.push_back(route.goal);
  return out;
}

inline double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
  return len;
}

}  // namespace aevac
