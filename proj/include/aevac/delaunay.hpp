#pragma once

// Delaunay triangulation by lexicographic sweep-hull construction followed by
// Lawson edge flips. Cocircular quadruples are left as constructed, so the
// output depends only on the point set and its lexicographic order.
//
// Predicates are exact: coordinates are snapped to a 1 micrometre lattice and
// evaluated in 128-bit integers. Points closer than the lattice step collapse
// to the first of them. Coordinates must stay within 500 m of the origin so the
// incircle determinant fits in 128 bits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "aevac/error.hpp"
#include "aevac/vec2.hpp"

namespace aevac {

using Triangle = std::array<std::uint32_t, 3>;

struct TriMesh {
  std::vector<Vec2> vertices;
  /// Counter-clockwise vertex triples.
  std::vector<Triangle> triangles;
  /// neighbors[t][i] is the triangle across edge (t[i], t[i+1]), or -1 on the hull.
  std::vector<std::array<std::int32_t, 3>> neighbors;
  std::vector<char> traversable;

  std::size_t size() const { return triangles.size(); }
  Vec2 corner(std::size_t t, int i) const { return vertices[triangles[t][static_cast<std::size_t>(i)]]; }
  Vec2 centroid(std::size_t t) const { return (corner(t, 0) + corner(t, 1) + corner(t, 2)) / 3.0; }
  bool contains(std::size_t t, Vec2 p, double eps = 1e-12) const {
    return orient(corner(t, 0), corner(t, 1), p) >= -eps && orient(corner(t, 1), corner(t, 2), p) >= -eps &&
           orient(corner(t, 2), corner(t, 0), p) >= -eps;
  }
};

/// Positive when d lies strictly inside the circumcircle of the counter-clockwise triangle abc.
inline double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const long double adx = a.x - d.x, ady = a.y - d.y;
  const long double bdx = b.x - d.x, bdy = b.y - d.y;
  const long double cdx = c.x - d.x, cdy = c.y - d.y;
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return static_cast<double>(adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
                             ad * (bdx * cdy - bdy * cdx));
}

namespace detail {

inline constexpr double kMaxCoordinate = 500.0;

struct LatticePoint {
  std::int64_t x, y;
  auto operator<=>(const LatticePoint&) const = default;
};

inline int sign_of(__int128 v) { return (v > 0) - (v < 0); }

inline int orient_exact(LatticePoint a, LatticePoint b, LatticePoint c) {
  const __int128 abx = b.x - a.x, aby = b.y - a.y, acx = c.x - a.x, acy = c.y - a.y;
  return sign_of(abx * acy - aby * acx);
}

/// Sign of the incircle determinant; positive when d is strictly inside circle(a, b, c), abc ccw.
inline int incircle_exact(LatticePoint a, LatticePoint b, LatticePoint c, LatticePoint d) {
  const __int128 adx = a.x - d.x, ady = a.y - d.y;
  const __int128 bdx = b.x - d.x, bdy = b.y - d.y;
  const __int128 cdx = c.x - d.x, cdy = c.y - d.y;
  const __int128 ad = adx * adx + ady * ady;
  const __int128 bd = bdx * bdx + bdy * bdy;
  const __int128 cd = cdx * cdx + cdy * cdy;
  return sign_of(adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx));
}

class Triangulator {
 public:
  explicit Triangulator(std::span<const Vec2> pts) : pts_(pts.begin(), pts.end()) {
    lat_.reserve(pts_.size());
    for (const Vec2& p : pts_) {
      if (!(std::abs(p.x) <= kMaxCoordinate && std::abs(p.y) <= kMaxCoordinate)) {
        throw GeometryError("triangulation input outside the supported coordinate range");
      }
      lat_.push_back({std::llround(p.x * kLatticePerMetre), std::llround(p.y * kLatticePerMetre)});
    }
  }

  TriMesh run() {
    std::vector<std::uint32_t> order(pts_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lat_[a] < lat_[b]; });
    order.erase(std::unique(order.begin(), order.end(), [&](auto a, auto b) { return lat_[a] == lat_[b]; }),
                order.end());
    if (order.size() < 3) throw GeometryError("triangulation needs at least 3 distinct points");

    std::size_t k = 2;
    while (k < order.size() && orient_exact(lat_[order[0]], lat_[order[1]], lat_[order[k]]) == 0) ++k;
    if (k == order.size()) throw GeometryError("triangulation input is collinear");

    seed_fan(order, k);
    for (std::size_t i = k + 1; i < order.size(); ++i) insert(order[i]);
    legalize_all();
    return finish();
  }

 private:
  static constexpr std::int64_t kNone = -1;

  static std::size_t next(std::size_t e) { return e - e % 3 + (e + 1) % 3; }

  std::size_t add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const std::size_t t = tri_.size();
    tri_.insert(tri_.end(), {a, b, c});
    opp_.insert(opp_.end(), {kNone, kNone, kNone});
    return t;
  }
  void link(std::size_t e, std::int64_t o) {
    opp_[e] = o;
    if (o != kNone) opp_[static_cast<std::size_t>(o)] = static_cast<std::int64_t>(e);
  }

  void seed_fan(const std::vector<std::uint32_t>& order, std::size_t k) {
    const std::uint32_t apex = order[k];
    const bool left = orient_exact(lat_[order[0]], lat_[order[1]], lat_[apex]) > 0;
    // Chain edges order[i] -> order[i+1] with the apex on the left when `left`.
    std::vector<std::size_t> chain_he;
    std::int64_t prev_side = kNone;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      std::uint32_t a = order[i], b = order[i + 1];
      if (!left) std::swap(a, b);
      const std::size_t e = add_triangle(a, b, apex);  // a->b, b->apex, apex->a
      chain_he.push_back(e);
      // Shared side: the edge touching order[i] and the apex.
      if (left) {
        // apex->a is e+2; previous triangle's b->apex is (prev)+1 where b == a.
        if (prev_side != kNone) link(e + 2, prev_side);
        prev_side = static_cast<std::int64_t>(e + 1);
      } else {
        if (prev_side != kNone) link(e + 1, prev_side);
        prev_side = static_cast<std::int64_t>(e + 2);
      }
    }
    // Hull in counter-clockwise order, recording the interior halfedge of each hull edge.
    hull_.clear();
    hull_he_.clear();
    if (left) {
      for (std::size_t i = 0; i < k; ++i) hull_.push_back(order[i]);
      hull_.push_back(apex);
      for (std::size_t i = 0; i + 1 < k; ++i) hull_he_.push_back(chain_he[i]);
      hull_he_.push_back(chain_he.back() + 1);  // order[k-1] -> apex
      hull_he_.push_back(chain_he.front() + 2); // apex -> order[0]
    } else {
      hull_.push_back(order[0]);
      hull_.push_back(apex);
      for (std::size_t i = k - 1; i >= 1; --i) hull_.push_back(order[i]);
      // Triangles are (order[i+1], order[i], apex).
      hull_he_.push_back(chain_he.front() + 1);  // order[0] -> apex
      hull_he_.push_back(chain_he.back() + 2);   // apex -> order[k-1]
      for (std::size_t i = k - 1; i >= 1; --i) hull_he_.push_back(chain_he[i - 1]);
    }
  }

  void insert(std::uint32_t p) {
    const std::size_t h = hull_.size();
    auto visible = [&](std::size_t i) {
      return orient_exact(lat_[hull_[i]], lat_[hull_[(i + 1) % h]], lat_[p]) < 0;
    };
    std::size_t first = h;
    for (std::size_t i = 0; i < h; ++i) {
      if (visible(i)) { first = i; break; }
    }
    if (first == h) throw GeometryError("triangulation: point not outside hull");
    // Extend to the maximal cyclic run of visible edges.
    std::size_t start = first;
    std::size_t steps = 0;
    while (steps < h && visible((start + h - 1) % h)) { start = (start + h - 1) % h; ++steps; }
    std::size_t count = 0;
    while (count < h && visible((start + count) % h)) ++count;

    std::int64_t prev_side = kNone;
    std::size_t first_tri = 0, last_tri = 0;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = (start + c) % h;
      const std::uint32_t a = hull_[i], b = hull_[(i + 1) % h];
      const std::size_t e = add_triangle(b, a, p);  // b->a, a->p, p->b
      link(e, static_cast<std::int64_t>(hull_he_[i]));
      if (prev_side != kNone) link(e + 1, prev_side);
      prev_side = static_cast<std::int64_t>(e + 2);
      if (c == 0) first_tri = e;
      last_tri = e;
    }
    std::vector<std::uint32_t> hull;
    std::vector<std::size_t> hull_he;
    hull.reserve(h + 1);
    // New hull: ..., hull[start], p, hull[start+count], ...
    for (std::size_t c = 0; c + count < h + 1; ++c) {
      const std::size_t i = (start + count + c) % h;
      hull.push_back(hull_[i]);
      if (c + count < h) hull_he.push_back(hull_he_[i]);
    }
    // The last kept vertex is hull_[start]; edges hull[start] -> p -> hull[start+count].
    hull_he.push_back(first_tri + 1);  // a(start) -> p
    hull.push_back(p);
    hull_he.push_back(last_tri + 2);  // p -> b(start+count)
    hull_ = std::move(hull);
    hull_he_ = std::move(hull_he);
  }

  bool illegal(std::size_t e) const {
    const std::int64_t o = opp_[e];
    if (o == kNone) return false;
    const auto oe = static_cast<std::size_t>(o);
    return incircle_exact(lat_[tri_[e]], lat_[tri_[next(e)]], lat_[tri_[next(next(e))]],
                          lat_[tri_[next(next(oe))]]) > 0;
  }

  void flip(std::size_t e) {
    const auto o = static_cast<std::size_t>(opp_[e]);
    const std::size_t t1 = e - e % 3, t2 = o - o % 3;
    const std::size_t e1 = next(e), e2 = next(e1), o1 = next(o), o2 = next(o1);
    const std::uint32_t a = tri_[e], b = tri_[e1], c = tri_[e2], d = tri_[o2];
    const std::int64_t n_bc = opp_[e1], n_ca = opp_[e2], n_ad = opp_[o1], n_db = opp_[o2];
    // T1 = (a, d, c), T2 = (d, b, c).
    tri_[t1] = a; tri_[t1 + 1] = d; tri_[t1 + 2] = c;
    tri_[t2] = d; tri_[t2 + 1] = b; tri_[t2 + 2] = c;
    link(t1, n_ad);
    link(t1 + 2, n_ca);
    link(t2, n_db);
    link(t2 + 1, n_bc);
    link(t1 + 1, static_cast<std::int64_t>(t2 + 2));
    for (std::size_t x : {t1, t1 + 2, t2, t2 + 1}) stack_.push_back(x);
  }

  void legalize_all() {
    for (std::size_t e = 0; e < tri_.size(); ++e) stack_.push_back(e);
    std::size_t guard = 0;
    const std::size_t limit = 64 * tri_.size() * (tri_.size() / 3 + 8);
    while (!stack_.empty()) {
      const std::size_t e = stack_.back();
      stack_.pop_back();
      if (illegal(e)) flip(e);
      if (++guard > limit) throw GeometryError("triangulation: flip sequence did not terminate");
    }
  }

  TriMesh finish() const {
    TriMesh m;
    m.vertices = pts_;
    const std::size_t n = tri_.size() / 3;
    m.triangles.resize(n);
    m.neighbors.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      for (int i = 0; i < 3; ++i) {
        const std::size_t e = 3 * t + static_cast<std::size_t>(i);
        m.triangles[t][static_cast<std::size_t>(i)] = tri_[e];
        m.neighbors[t][static_cast<std::size_t>(i)] =
            opp_[e] == kNone ? -1 : static_cast<std::int32_t>(opp_[e] / 3);
      }
    }
    m.traversable.assign(n, 1);
    return m;
  }

  std::vector<Vec2> pts_;
  std::vector<LatticePoint> lat_;
  std::vector<std::uint32_t> tri_;
  std::vector<std::int64_t> opp_;
  std::vector<std::uint32_t> hull_;
  std::vector<std::size_t> hull_he_;
  std::vector<std::size_t> stack_;
};

}  // namespace detail

/// Delaunay triangulation of the point set; vertex indices refer to `points`.
inline TriMesh triangulate(std::span<const Vec2> points) { return detail::Triangulator(points).run(); }

}  // namespace aevac
