#include <gtest/gtest.h>

#include <random>
#include <set>

#include "aevac/delaunay.hpp"

namespace aevac {
namespace {

// Circumcircle test done the long way: circumcentre and radius. The slack
// covers the 1 micrometre snapping applied by the triangulation.
bool strictly_inside_circumcircle(Vec2 a, Vec2 b, Vec2 c, Vec2 p) {
  const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
  const double ux = (abs_sq(a) * (b.y - c.y) + abs_sq(b) * (c.y - a.y) + abs_sq(c) * (a.y - b.y)) / d;
  const double uy = (abs_sq(a) * (c.x - b.x) + abs_sq(b) * (a.x - c.x) + abs_sq(c) * (b.x - a.x)) / d;
  const Vec2 u{ux, uy};
  const double r = distance(u, a);
  return distance(u, p) < r - 1e-5;
}

void expect_valid(const TriMesh& m, std::span<const Vec2> pts) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> directed;
  for (std::size_t t = 0; t < m.size(); ++t) {
    const double o = orient(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
    ASSERT_GT(o, 0.0) << "triangle " << t << " not counter-clockwise";
    for (std::size_t i = 0; i < 3; ++i) {
      const std::uint32_t a = m.triangles[t][i], b = m.triangles[t][(i + 1) % 3];
      ASSERT_TRUE(directed.insert({a, b}).second);
      const std::int32_t nb = m.neighbors[t][i];
      if (nb >= 0) {
        const auto& other = m.triangles[static_cast<std::size_t>(nb)];
        bool found = false;
        for (std::size_t j = 0; j < 3; ++j) found |= other[j] == b && other[(j + 1) % 3] == a;
        ASSERT_TRUE(found);
      }
    }
  }
  for (std::size_t t = 0; t < m.size(); ++t) {
    for (const Vec2& p : pts) {
      const Vec2 a = m.corner(t, 0), b = m.corner(t, 1), c = m.corner(t, 2);
      if (p == a || p == b || p == c) continue;
      ASSERT_FALSE(strictly_inside_circumcircle(a, b, c, p))
          << "triangle " << t << " (" << a.x << "," << a.y << ") (" << b.x << "," << b.y << ") (" << c.x << ","
          << c.y << ") p=(" << p.x << "," << p.y << ") incircle=" << incircle(a, b, c, p);
    }
  }
}

double hull_area(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<Vec2> h;
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t base = h.size();
    for (const Vec2& p : pts) {
      while (h.size() >= base + 2 && orient(h[h.size() - 2], h.back(), p) <= 0.0) h.pop_back();
      h.push_back(p);
    }
    h.pop_back();
    std::reverse(pts.begin(), pts.end());
  }
  double a = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) a += det(h[i], h[(i + 1) % h.size()]);
  return 0.5 * a;
}

double mesh_area(const TriMesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.size(); ++t) a += 0.5 * orient(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
  return a;
}

TEST(Triangulate, UnitSquare) {
  const std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const TriMesh m = triangulate(pts);
  ASSERT_EQ(m.size(), 2u);
  expect_valid(m, pts);
  EXPECT_NEAR(mesh_area(m), 1.0, 1e-15);
}

TEST(Triangulate, RejectsDegenerateInput) {
  EXPECT_THROW(triangulate(std::vector<Vec2>{{0, 0}, {1, 1}}), GeometryError);
  EXPECT_THROW(triangulate(std::vector<Vec2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), GeometryError);
  EXPECT_THROW(triangulate(std::vector<Vec2>{{0, 0}, {0, 0}, {1, 1}}), GeometryError);
}

TEST(Triangulate, CollinearSeedChain) {
  for (double apex : {1.0, -1.0}) {
    const std::vector<Vec2> pts{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {1.5, apex}, {4, 0.5 * apex}};
    const TriMesh m = triangulate(pts);
    expect_valid(m, pts);
    EXPECT_NEAR(mesh_area(m), hull_area(pts), 1e-12);
  }
}

TEST(Triangulate, Deterministic) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({u(rng), u(rng)});
  const TriMesh a = triangulate(pts), b = triangulate(pts);
  EXPECT_EQ(a.triangles, b.triangles);
}

TEST(Triangulate, RandomPointsAreDelaunay) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<Vec2> pts;
    const int n = 3 + trial * 4;
    for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
    const TriMesh m = triangulate(pts);
    expect_valid(m, pts);
    EXPECT_NEAR(mesh_area(m), hull_area(pts), 1e-9);
  }
}

TEST(Triangulate, GridPointsCoverHull) {
  // Lattice points are massively cocircular; the result must still be a valid
  // triangulation with no point inside any circumcircle.
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> u(0, 12);
    std::vector<Vec2> pts;
    for (int i = 0; i < 60; ++i) pts.push_back({0.1 * u(rng), 0.1 * u(rng)});
    pts.push_back({0, 0});
    pts.push_back({1.2, 0.3});
    const TriMesh m = triangulate(pts);
    expect_valid(m, pts);
    EXPECT_NEAR(mesh_area(m), hull_area(pts), 1e-9);
  }
}

TEST(Triangulate, EulerCount) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({u(rng), u(rng)});
  const TriMesh m = triangulate(pts);
  std::size_t hull_edges = 0;
  for (const auto& nb : m.neighbors) hull_edges += static_cast<std::size_t>(std::count(nb.begin(), nb.end(), -1));
  // Random points in general position: T = 2n - 2 - h.
  EXPECT_EQ(m.size(), 2 * pts.size() - 2 - hull_edges);
}

}  // namespace
}  // namespace aevac
