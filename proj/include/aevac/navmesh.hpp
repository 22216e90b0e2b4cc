#pragma once

// Navigation mesh: traversable triangles over the wall corner bag, the portal
// graph on shared triangle edges, per-simulation transient nodes, and
// shortest-route queries toward exit edges.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "aevac/delaunay.hpp"
#include "aevac/error.hpp"
#include "aevac/geometry.hpp"
#include "aevac/vec2.hpp"

namespace aevac {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Marks triangles whose centroid lies strictly inside an obstacle as non-traversable.
inline TriMesh prune_interior(TriMesh mesh, const ObstacleSet& obstacles) {
  for (std::size_t t = 0; t < mesh.size(); ++t) {
    const Vec2 c = mesh.centroid(t);
    mesh.traversable[t] = std::none_of(obstacles.rectangles.begin(), obstacles.rectangles.end(),
                                       [&](const Rect& r) { return r.contains_open(c); });
  }
  return mesh;
}

/// Area of the intersection of triangle (a, b, c) with rectangle r.
inline double triangle_rect_overlap(Vec2 a, Vec2 b, Vec2 c, const Rect& r) {
  std::vector<Vec2> poly{a, b, c}, next;
  auto clip = [&](auto inside, auto cross) {
    next.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
      const bool pin = inside(p), qin = inside(q);
      if (pin) next.push_back(p);
      if (pin != qin) next.push_back(cross(p, q));
    }
    poly.swap(next);
  };
  auto at_x = [](double x) {
    return [x](Vec2 p, Vec2 q) { return p + (q - p) * ((x - p.x) / (q.x - p.x)); };
  };
  auto at_y = [](double y) {
    return [y](Vec2 p, Vec2 q) { return p + (q - p) * ((y - p.y) / (q.y - p.y)); };
  };
  clip([&](Vec2 p) { return p.x >= r.lo.x; }, at_x(r.lo.x));
  clip([&](Vec2 p) { return p.x <= r.hi.x; }, at_x(r.hi.x));
  clip([&](Vec2 p) { return p.y >= r.lo.y; }, at_y(r.lo.y));
  clip([&](Vec2 p) { return p.y <= r.hi.y; }, at_y(r.hi.y));
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) area += det(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(area);
}

// ---------------------------------------------------------------------------
// Portal graph

struct PortalEdge {
  std::uint32_t a;  // a < b
  std::uint32_t b;
  Vec2 midpoint;
  double length;
};

class NavGraph {
 public:
  struct Link {
    NodeId to;
    double weight;
  };

  NavGraph() = default;

  /// Builds portal nodes over `mesh`. Edges of traversable triangles lying inside
  /// any rectangle of `exit_gaps[k]` become exit nodes of exit k.
  NavGraph(const TriMesh& mesh, std::span<const Rect> exit_gaps) {
    if (std::none_of(mesh.traversable.begin(), mesh.traversable.end(), [](char f) { return f != 0; })) {
      throw GeometryError("navigation mesh has no traversable triangles");
    }
    tri_nodes_.assign(mesh.size(), {kNoNode, kNoNode, kNoNode});
    std::map<std::pair<std::uint32_t, std::uint32_t>, NodeId> index;
    auto node_for = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, fresh] = index.try_emplace({key.first, key.second}, static_cast<NodeId>(nodes_.size()));
      if (fresh) {
        const Vec2 pa = mesh.vertices[key.first], pb = mesh.vertices[key.second];
        nodes_.push_back({key.first, key.second, (pa + pb) * 0.5, distance(pa, pb)});
      }
      return it->second;
    };
    for (std::size_t t = 0; t < mesh.size(); ++t) {
      if (!mesh.traversable[t]) continue;
      for (int i = 0; i < 3; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const std::int32_t nb = mesh.neighbors[t][ui];
        const std::uint32_t a = mesh.triangles[t][ui], b = mesh.triangles[t][(ui + 1) % 3];
        const bool shared = nb >= 0 && mesh.traversable[static_cast<std::size_t>(nb)];
        bool exit_edge = false;
        if (nb < 0 || shared) {
          for (const Rect& g : exit_gaps) {
            if (g.contains_closed(mesh.vertices[a], 1e-9) && g.contains_closed(mesh.vertices[b], 1e-9)) {
              exit_edge = true;
            }
          }
        }
        if (shared || exit_edge) tri_nodes_[t][ui] = node_for(a, b);
      }
    }
    adjacency_.resize(nodes_.size());
    for (std::size_t t = 0; t < mesh.size(); ++t) {
      const auto& tn = tri_nodes_[t];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const NodeId u = tn[static_cast<std::size_t>(i)], v = tn[static_cast<std::size_t>(j)];
          if (i == j || u == kNoNode || v == kNoNode) continue;
          adjacency_[u].push_back({v, distance(nodes_[u].midpoint, nodes_[v].midpoint)});
        }
      }
    }
    for (auto& links : adjacency_) {
      std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) { return x.to < y.to; });
    }
    exit_of_.assign(nodes_.size(), -1);
    exits_.resize(exit_gaps.size());
    for (std::size_t k = 0; k < exit_gaps.size(); ++k) {
      const Rect& g = exit_gaps[k];
      for (NodeId n = 0; n < nodes_.size(); ++n) {
        if (g.contains_closed(mesh.vertices[nodes_[n].a], 1e-9) && g.contains_closed(mesh.vertices[nodes_[n].b], 1e-9)) {
          exits_[k].push_back(n);
          if (exit_of_[n] < 0) exit_of_[n] = static_cast<int>(k);
        }
      }
    }
    node_tris_.assign(nodes_.size(), {-1, -1});
    for (std::size_t t = 0; t < mesh.size(); ++t) {
      for (NodeId n : tri_nodes_[t]) {
        if (n == kNoNode) continue;
        auto& slot = node_tris_[n];
        (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<std::int32_t>(t);
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& l : adjacency_) n += l.size();
    return n / 2;
  }
  const PortalEdge& node(NodeId n) const { return nodes_[n]; }
  std::span<const Link> links(NodeId n) const { return adjacency_[n]; }
  /// Node ids on the three edges of triangle t (kNoNode where the edge is not a node).
  const std::array<NodeId, 3>& triangle_nodes(std::size_t t) const { return tri_nodes_[t]; }
  /// Traversable triangles bordering node n (second is -1 for hull exit edges).
  const std::array<std::int32_t, 2>& node_triangles(NodeId n) const { return node_tris_[n]; }
  std::size_t exit_count() const { return exits_.size(); }
  std::span<const NodeId> exit_nodes(std::size_t k) const { return exits_[k]; }
  int exit_of(NodeId n) const { return exit_of_[n]; }

 private:
  std::vector<PortalEdge> nodes_;
  std::vector<std::vector<Link>> adjacency_;
  std::vector<std::array<NodeId, 3>> tri_nodes_;
  std::vector<std::array<std::int32_t, 2>> node_tris_;
  std::vector<std::vector<NodeId>> exits_;
  std::vector<int> exit_of_;
};

inline NavGraph build_graph(const TriMesh& mesh, std::span<const Rect> exit_gaps) {
  return NavGraph(mesh, exit_gaps);
}

/// Traversable triangle containing p (lowest index on shared boundaries), if any.
inline std::optional<std::size_t> locate_triangle(const TriMesh& mesh, Vec2 p) {
  for (std::size_t t = 0; t < mesh.size(); ++t) {
    if (mesh.traversable[t] && mesh.contains(t, p)) return t;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shortest paths

struct GraphPath {
  std::vector<NodeId> nodes;
  double cost = 0.0;
};

namespace detail {

inline bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

/// Dijkstra from `source` to the nearest node with targets[n] != 0. Target nodes
/// are terminal; `blocked` nodes are never entered. Ties in cost resolve to the
/// lexicographically smallest node sequence. `Graph` provides size() and
/// for_each_link(u, f(to, weight)).
template <class Graph>
std::optional<GraphPath> shortest_path(const Graph& g, NodeId source, std::span<const char> targets,
                                       std::span<const char> blocked = {}) {
  const std::size_t n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<NodeId> pred(n, kNoNode);
  std::vector<char> done(n, 0);
  auto is_target = [&](NodeId v) { return v < targets.size() && targets[v]; };
  auto is_blocked = [&](NodeId v) { return v < blocked.size() && blocked[v]; };
  auto path_to = [&](NodeId v) {
    std::vector<NodeId> p;
    for (NodeId x = v; x != kNoNode; x = pred[x]) p.push_back(x);
    std::reverse(p.begin(), p.end());
    return p;
  };

  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[source] = 0.0;
  open.push({0.0, source});
  std::optional<GraphPath> best;
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (done[u] || d > dist[u]) continue;
    done[u] = 1;
    if (best && d > best->cost && !detail::nearly_equal(d, best->cost)) break;
    if (is_target(u) && u != source) {
      auto p = path_to(u);
      if (!best || d < best->cost - 1e-12 * std::max(1.0, d) || p < best->nodes) best = GraphPath{std::move(p), d};
      continue;
    }
    g.for_each_link(u, [&](NodeId v, double w) {
      if (done[v] || is_blocked(v)) return;
      const double nd = d + w;
      if (dist[v] == inf || (nd < dist[v] && !detail::nearly_equal(nd, dist[v]))) {
        dist[v] = nd;
        pred[v] = u;
        open.push({nd, v});
      } else if (detail::nearly_equal(nd, dist[v]) && pred[v] != u) {
        auto via_u = path_to(u), via_pred = path_to(pred[v]);
        via_u.push_back(v);
        via_pred.push_back(v);
        if (via_u < via_pred) pred[v] = u;
      }
    });
  }
  return best;
}

/// Per-simulation view of a NavGraph with transient point nodes and blocked nodes.
/// The base graph is never modified.
class RouteGraph {
 public:
  explicit RouteGraph(const NavGraph& base, const TriMesh& mesh) : base_(&base), mesh_(&mesh) {
    blocked_.assign(base.size(), 0);
  }

  std::size_t size() const { return base_->size() + transients_.size(); }
  std::size_t node_count() const {
    return base_->size() + static_cast<std::size_t>(std::count_if(transients_.begin(), transients_.end(),
                                                                  [](const Transient& t) { return t.alive; }));
  }
  std::size_t edge_count() const {
    std::size_t n = base_->edge_count();
    for (const auto& t : transients_) {
      if (t.alive) n += t.links.size();
    }
    return n;
  }
  const NavGraph& base() const { return *base_; }
  const TriMesh& mesh() const { return *mesh_; }

  /// Adds a node at p linked to the portal edges of its containing traversable triangle.
  NodeId attach_point(Vec2 p) {
    const auto tri = locate_triangle(*mesh_, p);
    if (!tri) throw RouteError("point is inside a wall or outside the navigation mesh");
    Transient t{p, *tri, {}, true};
    for (NodeId n : base_->triangle_nodes(*tri)) {
      if (n != kNoNode) t.links.push_back({n, distance(p, base_->node(n).midpoint)});
    }
    std::sort(t.links.begin(), t.links.end(), [](const auto& x, const auto& y) { return x.to < y.to; });
    transients_.push_back(std::move(t));
    return static_cast<NodeId>(base_->size() + transients_.size() - 1);
  }

  void detach(NodeId id) {
    const std::size_t k = id - base_->size();
    transients_.at(k).alive = false;
    while (!transients_.empty() && !transients_.back().alive) transients_.pop_back();
  }

  std::size_t transient_triangle(NodeId id) const { return transients_.at(id - base_->size()).tri; }
  Vec2 transient_point(NodeId id) const { return transients_.at(id - base_->size()).p; }
  std::size_t degree(NodeId id) const {
    if (id >= base_->size()) return transients_.at(id - base_->size()).links.size();
    std::size_t d = base_->links(id).size();
    for (const auto& t : transients_) {
      if (!t.alive) continue;
      for (const auto& l : t.links) d += l.to == id;
    }
    return d;
  }

  template <class F>
  void for_each_link(NodeId u, F&& f) const {
    if (u >= base_->size()) {
      const auto& t = transients_[u - base_->size()];
      if (!t.alive) return;
      for (const auto& l : t.links) f(l.to, l.weight);
      return;
    }
    for (const auto& l : base_->links(u)) f(l.to, l.weight);
  }

  void set_blocked(NodeId n, bool b) { blocked_.at(n) = b; }
  bool blocked(NodeId n) const { return n < blocked_.size() && blocked_[n]; }
  /// Blocks every node of exit k (its door gap becomes impassable for routing).
  void block_exit(std::size_t k) {
    for (NodeId n : base_->exit_nodes(k)) blocked_[n] = 1;
  }
  std::span<const char> blocked_mask() const { return blocked_; }

 private:
  struct Transient {
    Vec2 p;
    std::size_t tri;
    std::vector<NavGraph::Link> links;
    bool alive;
  };
  const NavGraph* base_;
  const TriMesh* mesh_;
  std::vector<Transient> transients_;
  std::vector<char> blocked_;
};

// ---------------------------------------------------------------------------
// Portal routes

struct Portal {
  Vec2 left;
  Vec2 right;
  std::uint32_t left_vertex;
  std::uint32_t right_vertex;
};

struct PortalRoute {
  Vec2 origin;
  Vec2 goal;
  std::vector<Portal> portals;
  int exit = -1;
  double graph_cost = 0.0;
};

/// Converts a node path starting at transient `source` into an ordered portal list.
/// The final node is the goal edge; its midpoint becomes the goal.
inline PortalRoute to_portal_route(const RouteGraph& g, NodeId source, const GraphPath& path) {
  const TriMesh& mesh = g.mesh();
  const NavGraph& base = g.base();
  PortalRoute route;
  route.origin = g.transient_point(source);
  route.graph_cost = path.cost;
  std::size_t cur = g.transient_triangle(source);
  std::vector<NodeId> nodes(path.nodes.begin() + 1, path.nodes.end());
  if (nodes.empty()) {
    route.goal = route.origin;
    return route;
  }
  auto other_side = [&](NodeId n, std::size_t t) -> std::int32_t {
    const auto& tris = base.node_triangles(n);
    return tris[0] == static_cast<std::int32_t>(t) ? tris[1] : tris[0];
  };
  auto on_triangle = [&](NodeId n, std::size_t t) {
    const auto& tn = base.triangle_nodes(t);
    return std::find(tn.begin(), tn.end(), n) != tn.end();
  };
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const NodeId e = nodes[i];
    if (on_triangle(nodes[i + 1], cur)) continue;  // never actually crossed
    const std::int32_t nxt = other_side(e, cur);
    if (nxt < 0) throw RouteError("route leaves the navigation mesh");
    const auto& tri = mesh.triangles[cur];
    for (std::size_t j = 0; j < 3; ++j) {
      const std::uint32_t a = tri[j], b = tri[(j + 1) % 3];
      if (std::minmax(a, b) == std::minmax(base.node(e).a, base.node(e).b)) {
        route.portals.push_back({mesh.vertices[b], mesh.vertices[a], b, a});
        break;
      }
    }
    cur = static_cast<std::size_t>(nxt);
  }
  route.goal = base.node(nodes.back()).midpoint;
  route.exit = base.exit_of(nodes.back());
  return route;
}

/// Minimum-weight route from transient node `from` to the nearest node of any listed exit.
/// Portals shorter than `min_width` are not entered.
inline PortalRoute shortest_route(const RouteGraph& g, NodeId from, std::span<const std::size_t> exits,
                                  double min_width = 0.0) {
  std::vector<char> targets(g.size(), 0);
  for (std::size_t k : exits) {
    for (NodeId n : g.base().exit_nodes(k)) {
      if (!g.blocked(n)) targets[n] = 1;
    }
  }
  std::vector<char> blocked(g.blocked_mask().begin(), g.blocked_mask().end());
  blocked.resize(g.size(), 0);
  if (min_width > 0.0) {
    for (NodeId n = 0; n < g.base().size(); ++n) {
      if (g.base().node(n).length < min_width) blocked[n] = 1;
    }
  }
  auto path = shortest_path(g, from, targets, blocked);
  if (!path) throw RouteError("no exit reachable");
  return to_portal_route(g, from, *path);
}

// ---------------------------------------------------------------------------
// Complete navigation model for one floor

struct ExitInfo {
  VentPlacement vent;
  Rect gap;
};

struct NavMesh {
  double wall_thickness = 0.0;
  ObstacleSet obstacles;
  TriMesh mesh;
  NavGraph graph;
  std::vector<ExitInfo> exits;

  std::vector<Rect> exit_gaps() const {
    std::vector<Rect> g;
    for (const auto& e : exits) g.push_back(e.gap);
    return g;
  }
};

namespace detail {

/// Rectangles partially covered by some triangle; a conforming mesh has none.
inline std::vector<std::size_t> nonconforming_rects(const TriMesh& mesh, const std::vector<Rect>& rects) {
  std::vector<char> bad(rects.size(), 0);
  for (std::size_t t = 0; t < mesh.size(); ++t) {
    const Vec2 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
    const double area = 0.5 * std::abs(orient(a, b, c));
    const Rect box{{std::min({a.x, b.x, c.x}), std::min({a.y, b.y, c.y})},
                   {std::max({a.x, b.x, c.x}), std::max({a.y, b.y, c.y})}};
    double covered = 0.0;
    std::vector<std::size_t> touching;
    for (std::size_t r = 0; r < rects.size(); ++r) {
      if (!rects[r].overlaps_open(box)) continue;
      const double ov = triangle_rect_overlap(a, b, c, rects[r]);
      if (ov > 1e-9 * area) {
        covered += ov;
        touching.push_back(r);
      }
    }
    const bool partial = covered > 1e-7 * area && covered < (1.0 - 1e-7) * area;
    const bool misflagged = covered >= (1.0 - 1e-7) * area && mesh.traversable[t];
    if (partial || misflagged) {
      for (std::size_t r : touching) bad[r] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < rects.size(); ++r) {
    if (bad[r]) out.push_back(r);
  }
  return out;
}

}  // namespace detail

/// Triangulates the wall corner bag, splitting wall rectangles until every
/// triangle lies either entirely inside the walls or entirely outside them.
inline NavMesh build_navmesh(const FloorPlan& plan, double wall_thickness) {
  NavMesh nav;
  nav.wall_thickness = wall_thickness;
  nav.obstacles = to_obstacles(plan, wall_thickness);
  for (const VentPlacement& v : passable_vents(plan)) {
    if (v.is_exit()) nav.exits.push_back({v, vent_gap(v, wall_thickness)});
  }
  if (nav.obstacles.corner_bag.size() < 3) throw GeometryError(plan.floor_id + ": no walls to navigate");
  constexpr int kMaxRounds = 16;
  for (int round = 0;; ++round) {
    nav.mesh = prune_interior(triangulate(nav.obstacles.corner_bag), nav.obstacles);
    const auto bad = detail::nonconforming_rects(nav.mesh, nav.obstacles.rectangles);
    if (bad.empty()) break;
    if (round == kMaxRounds) throw GeometryError(plan.floor_id + ": walls could not be meshed conformingly");
    std::vector<Rect> rects;
    std::vector<char> split(nav.obstacles.rectangles.size(), 0);
    for (std::size_t r : bad) split[r] = 1;
    for (std::size_t r = 0; r < nav.obstacles.rectangles.size(); ++r) {
      const Rect& x = nav.obstacles.rectangles[r];
      if (!split[r]) {
        rects.push_back(x);
      } else if (x.width() >= x.height()) {
        const double m = snap_to_lattice(0.5 * (x.lo.x + x.hi.x));
        rects.push_back({x.lo, {m, x.hi.y}});
        rects.push_back({{m, x.lo.y}, x.hi});
      } else {
        const double m = snap_to_lattice(0.5 * (x.lo.y + x.hi.y));
        rects.push_back({x.lo, {x.hi.x, m}});
        rects.push_back({{x.lo.x, m}, x.hi});
      }
    }
    nav.obstacles.rectangles = std::move(rects);
    nav.obstacles.corner_bag = corner_bag_of(nav.obstacles.rectangles);
  }
  nav.graph = build_graph(nav.mesh, nav.exit_gaps());
  return nav;
}

/// Line-oriented dump for plotting:
///   R x0 y0 x1 y1          obstacle rectangle
///   V x y                  mesh vertex
///   T a b c traversable    triangle (vertex indices, 0/1 flag)
///   P n x1 y1 ... xn yn    polyline
inline void dump_navmesh(std::ostream& os, const NavMesh& nav, std::span<const std::vector<Vec2>> polylines = {}) {
  os << "# aevac navmesh dump v1\n";
  for (const Rect& r : nav.obstacles.rectangles) {
    os << "R " << r.lo.x << ' ' << r.lo.y << ' ' << r.hi.x << ' ' << r.hi.y << '\n';
  }
  for (const Vec2& v : nav.mesh.vertices) os << "V " << v.x << ' ' << v.y << '\n';
  for (std::size_t t = 0; t < nav.mesh.size(); ++t) {
    const auto& tri = nav.mesh.triangles[t];
    os << "T " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << int(nav.mesh.traversable[t] != 0) << '\n';
  }
  for (const auto& line : polylines) {
    os << "P " << line.size();
    for (const Vec2& p : line) os << ' ' << p.x << ' ' << p.y;
    os << '\n';
  }
}

}  // namespace aevac
