#pragma once

// Local movement: ORCA velocities against neighbouring agents and static wall
// polygons, line of sight, and the disk state machine that picks each agent's
// current local target along its funnel route.
//
// The ORCA construction and the three linear programs follow the reference
// RVO2 formulation, evaluated in double precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "aevac/vec2.hpp"

namespace aevac {

struct AgentBody {
  std::size_t id = 0;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.25;
  double v_pref_mag = 1.2;
  Vec2 pref_velocity;
  double max_speed = 1.2;
  /// Incapacitated or dead: keeps its disc, never moves, takes no avoidance role.
  bool is_static = false;
};

struct OrcaParams {
  double tau_agent = 2.0;
  double tau_obstacle = 0.4;
  double neighbor_dist = 5.0;
  std::size_t max_neighbors = 10;
};

/// Closed wall outlines. Each loop runs counter-clockwise around solid
/// material, so free space is on the right of every edge.
class ObstacleField {
 public:
  struct Vertex {
    Vec2 point;
    Vec2 unit_dir;  // towards next
    bool convex = true;
    std::size_t next = 0;
    std::size_t prev = 0;
  };

  ObstacleField() = default;

  /// Outline of the union of rects, with seams between touching rects removed.
  static ObstacleField from_rects(std::span<const Rect> rects);
  /// Loops given directly, counter-clockwise around solid.
  static ObstacleField from_polygons(const std::vector<std::vector<Vec2>>& loops, std::span<const Rect> rects = {});

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Rect>& rects() const { return rects_; }
  std::size_t loop_count() const { return loops_; }

  /// True iff segment a-b crosses no rectangle interior.
  bool line_of_sight(Vec2 a, Vec2 b) const {
    const Rect box{{std::min(a.x, b.x), std::min(a.y, b.y)}, {std::max(a.x, b.x), std::max(a.y, b.y)}};
    for (const Rect& r : rects_) {
      if (r.hi.x <= box.lo.x || box.hi.x <= r.lo.x || r.hi.y <= box.lo.y || box.hi.y <= r.lo.y) continue;
      if (segment_hits_rect_interior(a, b, r)) return false;
    }
    return true;
  }

 private:
  void add_loop(const std::vector<Vec2>& loop);

  std::vector<Vertex> vertices_;
  std::vector<Rect> rects_;
  std::size_t loops_ = 0;
};

inline void ObstacleField::add_loop(const std::vector<Vec2>& loop) {
  const std::size_t base = vertices_.size(), n = loop.size();
  if (n < 2) return;
  for (std::size_t i = 0; i < n; ++i) {
    Vertex v;
    v.point = loop[i];
    v.next = base + (i + 1) % n;
    v.prev = base + (i + n - 1) % n;
    v.unit_dir = normalize(loop[(i + 1) % n] - loop[i]);
    v.convex = n == 2 || orient(loop[(i + n - 1) % n], loop[i], loop[(i + 1) % n]) >= 0.0;
    vertices_.push_back(v);
  }
  ++loops_;
}

inline ObstacleField ObstacleField::from_polygons(const std::vector<std::vector<Vec2>>& loops,
                                                  std::span<const Rect> rects) {
  ObstacleField f;
  f.rects_.assign(rects.begin(), rects.end());
  for (const auto& loop : loops) f.add_loop(loop);
  return f;
}

inline ObstacleField ObstacleField::from_rects(std::span<const Rect> rects) {
  ObstacleField f;
  f.rects_.assign(rects.begin(), rects.end());
  if (rects.empty()) return f;
  std::vector<double> xs, ys;
  for (const Rect& r : rects) {
    xs.push_back(r.lo.x); xs.push_back(r.hi.x);
    ys.push_back(r.lo.y); ys.push_back(r.hi.y);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const std::int64_t nx = static_cast<std::int64_t>(xs.size()) - 1, ny = static_cast<std::int64_t>(ys.size()) - 1;
  std::vector<char> solid(static_cast<std::size_t>(nx * ny), 0);
  for (const Rect& r : rects) {
    const auto i0 = std::lower_bound(xs.begin(), xs.end(), r.lo.x) - xs.begin();
    const auto i1 = std::lower_bound(xs.begin(), xs.end(), r.hi.x) - xs.begin();
    const auto j0 = std::lower_bound(ys.begin(), ys.end(), r.lo.y) - ys.begin();
    const auto j1 = std::lower_bound(ys.begin(), ys.end(), r.hi.y) - ys.begin();
    for (auto j = j0; j < j1; ++j) {
      for (auto i = i0; i < i1; ++i) solid[static_cast<std::size_t>(j * nx + i)] = 1;
    }
  }
  auto is_solid = [&](std::int64_t i, std::int64_t j) {
    return i >= 0 && j >= 0 && i < nx && j < ny && solid[static_cast<std::size_t>(j * nx + i)];
  };

  // Boundary edges between solid and free cells, solid on the left.
  using Node = std::pair<std::int64_t, std::int64_t>;
  std::map<Node, std::vector<Node>> out;
  for (std::int64_t j = 0; j < ny; ++j) {
    for (std::int64_t i = 0; i < nx; ++i) {
      if (!is_solid(i, j)) continue;
      if (!is_solid(i, j - 1)) out[{i, j}].push_back({i + 1, j});
      if (!is_solid(i + 1, j)) out[{i + 1, j}].push_back({i + 1, j + 1});
      if (!is_solid(i, j + 1)) out[{i + 1, j + 1}].push_back({i, j + 1});
      if (!is_solid(i - 1, j)) out[{i, j + 1}].push_back({i, j});
    }
  }
  auto dir = [](Node a, Node b) { return std::pair{b.first - a.first, b.second - a.second}; };
  for (;;) {
    auto start = std::find_if(out.begin(), out.end(), [](const auto& kv) { return !kv.second.empty(); });
    if (start == out.end()) break;
    std::vector<Node> chain{start->first};
    Node cur = start->second.back();
    start->second.pop_back();
    Node prev = chain.front();
    while (cur != chain.front()) {
      auto& cand = out[cur];
      // Pinch points have two exits; the left turn keeps hugging the same solid.
      const auto [dx, dy] = dir(prev, cur);
      std::size_t pick = 0;
      for (std::size_t k = 1; k < cand.size(); ++k) {
        const auto [ex, ey] = dir(cur, cand[k]);
        if (dx * ey - dy * ex > 0) pick = k;
      }
      chain.push_back(cur);
      prev = cur;
      const Node nxt = cand[pick];
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(pick));
      cur = nxt;
    }
    std::vector<Vec2> loop;
    const std::size_t n = chain.size();
    for (std::size_t k = 0; k < n; ++k) {
      const auto [ax, ay] = dir(chain[(k + n - 1) % n], chain[k]);
      const auto [bx, by] = dir(chain[k], chain[(k + 1) % n]);
      if (ax * by - ay * bx == 0) continue;  // straight through
      loop.push_back({xs[static_cast<std::size_t>(chain[k].first)], ys[static_cast<std::size_t>(chain[k].second)]});
    }
    f.add_loop(loop);
  }
  return f;
}

struct OrcaLine {
  Vec2 point;
  Vec2 direction;
};

namespace detail {

inline constexpr double kOrcaEpsilon = 1e-5;

inline bool linear_program1(const std::vector<OrcaLine>& lines, std::size_t line_no, double radius, Vec2 opt,
                            bool direction_opt, Vec2& result) {
  const OrcaLine& l = lines[line_no];
  const double dp = dot(l.point, l.direction);
  const double disc = dp * dp + radius * radius - abs_sq(l.point);
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  double t_left = -dp - sq, t_right = -dp + sq;
  for (std::size_t i = 0; i < line_no; ++i) {
    const double denom = det(l.direction, lines[i].direction);
    const double numer = det(lines[i].direction, l.point - lines[i].point);
    if (std::abs(denom) <= kOrcaEpsilon) {
      if (numer < 0.0) return false;
      continue;
    }
    const double t = numer / denom;
    if (denom >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }
  if (direction_opt) {
    result = l.point + l.direction * (dot(opt, l.direction) > 0.0 ? t_right : t_left);
  } else {
    const double t = dot(l.direction, opt - l.point);
    result = l.point + l.direction * std::clamp(t, t_left, t_right);
  }
  return true;
}

/// Returns lines.size() on success, else the index of the first line that failed.
inline std::size_t linear_program2(const std::vector<OrcaLine>& lines, double radius, Vec2 opt, bool direction_opt,
                                   Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (abs_sq(opt) > radius * radius) {
    result = normalize(opt) * radius;
  } else {
    result = opt;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 keep = result;
      if (!linear_program1(lines, i, radius, opt, direction_opt, result)) {
        result = keep;
        return i;
      }
    }
  }
  return lines.size();
}

/// Infeasible case: minimise the largest penetration of the agent lines while
/// keeping the obstacle lines hard.
inline void linear_program3(const std::vector<OrcaLine>& lines, std::size_t obstacle_lines, std::size_t begin,
                            double radius, Vec2& result) {
  double worst = 0.0;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= worst) continue;
    std::vector<OrcaLine> proj(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(obstacle_lines));
    for (std::size_t j = obstacle_lines; j < i; ++j) {
      OrcaLine line;
      const double d = det(lines[i].direction, lines[j].direction);
      if (std::abs(d) <= kOrcaEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = (lines[i].point + lines[j].point) * 0.5;
      } else {
        line.point = lines[i].point + lines[i].direction * (det(lines[j].direction, lines[i].point - lines[j].point) / d);
      }
      line.direction = normalize(lines[j].direction - lines[i].direction);
      proj.push_back(line);
    }
    const Vec2 keep = result;
    if (linear_program2(proj, radius, Vec2{-lines[i].direction.y, lines[i].direction.x}, true, result) < proj.size()) {
      result = keep;
    }
    worst = det(lines[i].direction, lines[i].point - result);
  }
}

inline double dist_sq_point_segment(Vec2 a, Vec2 b, Vec2 p) {
  const Vec2 ab = b - a;
  const double r = dot(p - a, ab) / abs_sq(ab);
  if (r < 0.0) return abs_sq(p - a);
  if (r > 1.0) return abs_sq(p - b);
  return abs_sq(p - (a + ab * r));
}

/// Uniform bucket grid for radius queries over agent positions.
class NeighborGrid {
 public:
  NeighborGrid(std::span<const AgentBody> agents, double cell) : cell_(cell) {
    for (std::size_t i = 0; i < agents.size(); ++i) cells_[key(agents[i].position)].push_back(i);
  }

  template <class F>
  void for_each_near(Vec2 p, F&& f) const {
    const auto cx = coord(p.x), cy = coord(p.y);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = cells_.find(pack(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second) f(i);
      }
    }
  }

 private:
  std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::uint64_t pack(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xffffffffu);
  }
  std::uint64_t key(Vec2 p) const { return pack(coord(p.x), coord(p.y)); }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

inline void obstacle_lines(const AgentBody& a, const ObstacleField& field, double tau, std::vector<OrcaLine>& lines) {
  const auto& vs = field.vertices();
  const double range = tau * a.max_speed + a.radius;
  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const Vec2 p1 = vs[i].point, p2 = vs[vs[i].next].point;
    const double left_of = det(p1 - a.position, p2 - p1);
    if (left_of >= 0.0) continue;  // agent behind this edge
    const double d = dist_sq_point_segment(p1, p2, a.position);
    if (d < range * range) near.push_back({d, i});
  }
  std::stable_sort(near.begin(), near.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  const double inv_tau = 1.0 / tau;
  const double r = a.radius, r_sq = r * r;
  for (const auto& [unused, idx] : near) {
    const ObstacleField::Vertex* o1 = &vs[idx];
    const ObstacleField::Vertex* o2 = &vs[o1->next];
    const Vec2 rel1 = o1->point - a.position, rel2 = o2->point - a.position;

    bool covered = false;
    for (const OrcaLine& l : lines) {
      if (det(rel1 * inv_tau - l.point, l.direction) - inv_tau * r >= -kOrcaEpsilon &&
          det(rel2 * inv_tau - l.point, l.direction) - inv_tau * r >= -kOrcaEpsilon) {
        covered = true;
        break;
      }
    }
    if (covered) continue;

    const double d1 = abs_sq(rel1), d2 = abs_sq(rel2);
    const Vec2 edge = o2->point - o1->point;
    const double s = dot(-rel1, edge) / abs_sq(edge);
    const double d_line = abs_sq(-rel1 - edge * s);

    if (s < 0.0 && d1 <= r_sq) {
      if (o1->convex) lines.push_back({{0, 0}, normalize(Vec2{-rel1.y, rel1.x})});
      continue;
    }
    if (s > 1.0 && d2 <= r_sq) {
      if (o2->convex && det(rel2, o2->unit_dir) >= 0.0) lines.push_back({{0, 0}, normalize(Vec2{-rel2.y, rel2.x})});
      continue;
    }
    if (s >= 0.0 && s < 1.0 && d_line <= r_sq) {
      lines.push_back({{0, 0}, -o1->unit_dir});
      continue;
    }

    auto left_leg_of = [&](Vec2 rel, double dsq) {
      const double leg = std::sqrt(dsq - r_sq);
      return Vec2{rel.x * leg - rel.y * r, rel.x * r + rel.y * leg} / dsq;
    };
    auto right_leg_of = [&](Vec2 rel, double dsq) {
      const double leg = std::sqrt(dsq - r_sq);
      return Vec2{rel.x * leg + rel.y * r, -rel.x * r + rel.y * leg} / dsq;
    };
    Vec2 left_leg, right_leg;
    if (s < 0.0 && d_line <= r_sq) {
      // Seen obliquely: the left vertex alone defines the obstacle.
      if (!o1->convex) continue;
      o2 = o1;
      left_leg = left_leg_of(rel1, d1);
      right_leg = right_leg_of(rel1, d1);
    } else if (s > 1.0 && d_line <= r_sq) {
      if (!o2->convex) continue;
      o1 = o2;
      left_leg = left_leg_of(rel2, d2);
      right_leg = right_leg_of(rel2, d2);
    } else {
      left_leg = o1->convex ? left_leg_of(rel1, d1) : -o1->unit_dir;
      right_leg = o2->convex ? right_leg_of(rel2, d2) : o1->unit_dir;
    }

    // A leg pointing into the neighbouring edge is replaced by that edge; such
    // foreign legs never generate a constraint themselves.
    const ObstacleField::Vertex& left_nb = vs[o1->prev];
    bool left_foreign = false, right_foreign = false;
    if (o1->convex && det(left_leg, -left_nb.unit_dir) >= 0.0) {
      left_leg = -left_nb.unit_dir;
      left_foreign = true;
    }
    if (o2->convex && det(right_leg, o2->unit_dir) <= 0.0) {
      right_leg = o2->unit_dir;
      right_foreign = true;
    }

    const Vec2 left_cut = (o1->point - a.position) * inv_tau;
    const Vec2 right_cut = (o2->point - a.position) * inv_tau;
    const Vec2 cut_vec = right_cut - left_cut;
    const bool same = o1 == o2;
    const double t = same ? 0.5 : dot(a.velocity - left_cut, cut_vec) / abs_sq(cut_vec);
    const double t_left = dot(a.velocity - left_cut, left_leg);
    const double t_right = dot(a.velocity - right_cut, right_leg);

    if ((t < 0.0 && t_left < 0.0) || (same && t_left < 0.0 && t_right < 0.0)) {
      const Vec2 w = normalize(a.velocity - left_cut);
      lines.push_back({left_cut + w * (r * inv_tau), {w.y, -w.x}});
      continue;
    }
    if (t > 1.0 && t_right < 0.0) {
      const Vec2 w = normalize(a.velocity - right_cut);
      lines.push_back({right_cut + w * (r * inv_tau), {w.y, -w.x}});
      continue;
    }
    const double inf = std::numeric_limits<double>::infinity();
    const double dc = (t < 0.0 || t > 1.0 || same) ? inf : abs_sq(a.velocity - (left_cut + cut_vec * t));
    const double dl = t_left < 0.0 ? inf : abs_sq(a.velocity - (left_cut + left_leg * t_left));
    const double dr = t_right < 0.0 ? inf : abs_sq(a.velocity - (right_cut + right_leg * t_right));
    if (dc <= dl && dc <= dr) {
      const Vec2 d = -o1->unit_dir;
      lines.push_back({left_cut + Vec2{-d.y, d.x} * (r * inv_tau), d});
    } else if (dl <= dr) {
      if (left_foreign) continue;
      lines.push_back({left_cut + Vec2{-left_leg.y, left_leg.x} * (r * inv_tau), left_leg});
    } else {
      if (right_foreign) continue;
      const Vec2 d = -right_leg;
      lines.push_back({right_cut + Vec2{-d.y, d.x} * (r * inv_tau), d});
    }
  }
}

inline OrcaLine agent_line(const AgentBody& a, const AgentBody& b, double dt, double tau) {
  const Vec2 rel_pos = b.position - a.position;
  const Vec2 rel_vel = a.velocity - b.velocity;
  const double dist_sq = abs_sq(rel_pos);
  const double comb = a.radius + b.radius, comb_sq = comb * comb;
  const double inv_tau = 1.0 / tau;
  OrcaLine line;
  Vec2 u;
  if (dist_sq > comb_sq) {
    const Vec2 w = rel_vel - rel_pos * inv_tau;
    const double w_sq = abs_sq(w);
    const double dp1 = dot(w, rel_pos);
    if (dp1 < 0.0 && dp1 * dp1 > comb_sq * w_sq) {
      const double w_len = std::sqrt(w_sq);
      const Vec2 unit_w = w / w_len;
      line.direction = {unit_w.y, -unit_w.x};
      u = unit_w * (comb * inv_tau - w_len);
    } else {
      const double leg = std::sqrt(dist_sq - comb_sq);
      if (det(rel_pos, w) > 0.0) {
        line.direction = Vec2{rel_pos.x * leg - rel_pos.y * comb, rel_pos.x * comb + rel_pos.y * leg} / dist_sq;
      } else {
        line.direction = Vec2{rel_pos.x * leg + rel_pos.y * comb, -rel_pos.x * comb + rel_pos.y * leg} / -dist_sq;
      }
      u = line.direction * dot(rel_vel, line.direction) - rel_vel;
    }
  } else {
    // Already overlapping: resolve within one step.
    const double inv_dt = 1.0 / dt;
    const Vec2 w = rel_vel - rel_pos * inv_dt;
    const double w_len = length(w);
    const Vec2 unit_w = w / w_len;
    line.direction = {unit_w.y, -unit_w.x};
    u = unit_w * (comb * inv_dt - w_len);
  }
  // Static bodies do not reciprocate, so the mover takes the whole correction.
  line.point = a.velocity + u * (b.is_static ? 1.0 : 0.5);
  return line;
}

/// Discrete-step safety net: where the chosen velocities would still bring two
/// separated discs into contact within dt (possible once the linear program is
/// infeasible), both velocities are scaled back to the time of first contact.
inline constexpr double kContactSkin = 1e-8;

inline void prevent_overlap(std::span<const AgentBody> agents, std::vector<Vec2>& v, double dt) {
  double reach = 0.0, max_r = 0.0;
  for (const AgentBody& a : agents) {
    reach = std::max(reach, a.max_speed * dt);
    max_r = std::max(max_r, a.radius);
  }
  const double cell = 2.0 * (max_r + reach) + 1e-9;
  const NeighborGrid grid(agents, cell);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    grid.for_each_near(agents[i].position, [&](std::size_t j) {
      if (j > i && abs_sq(agents[j].position - agents[i].position) < cell * cell) pairs.push_back({i, j});
    });
  }
  std::sort(pairs.begin(), pairs.end());
  // After kRounds the remaining offenders are stopped outright; every such
  // round stops at least one more agent, so the loop ends.
  constexpr int kRounds = 32;
  for (int round = 0;; ++round) {
    bool changed = false;
    for (const auto& [i, j] : pairs) {
      const Vec2 p = agents[j].position - agents[i].position;
      const Vec2 rv = v[j] - v[i];
      const double comb = agents[i].radius + agents[j].radius + kContactSkin;
      const double c = abs_sq(p) - comb * comb;
      const double b = 2.0 * dot(p, rv);
      const double a = abs_sq(rv);
      if (b >= 0.0 || a == 0.0) continue;
      double t = 0.0;
      if (c > 0.0) {
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) continue;
        t = (-b - std::sqrt(disc)) / (2.0 * a);
        if (t >= dt) continue;
      }
      changed = true;
      if (round >= kRounds) {
        v[i] = v[j] = Vec2{};
      } else if (c > 0.0) {
        const double s = std::max(0.0, t / dt);
        v[i] = v[i] * s;
        v[j] = v[j] * s;
      } else {
        // In contact: drop the closing part of the relative velocity, keep sliding.
        const Vec2 n = normalize(p);
        const double closing = dot(rv, n);
        const double share_i = agents[j].is_static ? 1.0 : agents[i].is_static ? 0.0 : 0.5;
        v[i] += n * (closing * share_i);
        v[j] -= n * (closing * (1.0 - share_i));
        for (std::size_t k : {i, j}) {
          const double len = length(v[k]);
          if (len > agents[k].max_speed) v[k] = v[k] * (agents[k].max_speed / len);
        }
      }
    }
    if (!changed) break;
  }
}

}  // namespace detail

/// New velocity per agent from a snapshot of all agents; static agents get zero.
inline std::vector<Vec2> orca_velocities(std::span<const AgentBody> agents, const ObstacleField& obstacles, double dt,
                                         const OrcaParams& params = {}) {
  std::vector<Vec2> out(agents.size());
  const detail::NeighborGrid grid(agents, params.neighbor_dist);
  const double range_sq = params.neighbor_dist * params.neighbor_dist;
  std::vector<OrcaLine> lines;
  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentBody& a = agents[i];
    if (a.is_static) continue;
    lines.clear();
    detail::obstacle_lines(a, obstacles, params.tau_obstacle, lines);
    const std::size_t n_obst = lines.size();

    near.clear();
    grid.for_each_near(a.position, [&](std::size_t j) {
      if (j == i) return;
      const double d = abs_sq(agents[j].position - a.position);
      if (d < range_sq) near.push_back({d, j});
    });
    std::sort(near.begin(), near.end(), [&](const auto& x, const auto& y) {
      return x.first != y.first ? x.first < y.first : agents[x.second].id < agents[y.second].id;
    });
    if (near.size() > params.max_neighbors) near.resize(params.max_neighbors);
    for (const auto& [d, j] : near) lines.push_back(detail::agent_line(a, agents[j], dt, params.tau_agent));

    Vec2 v;
    const std::size_t fail = detail::linear_program2(lines, a.max_speed, a.pref_velocity, false, v);
    if (fail < lines.size()) detail::linear_program3(lines, n_obst, fail, a.max_speed, v);
    out[i] = v;
  }
  detail::prevent_overlap(agents, out, dt);
  return out;
}

// ---------------------------------------------------------------------------
// Disk state machine.

struct FsmState {
  bool in_disk = false;
  bool walk_eq_look = true;
  bool can_see = true;
  bool at_final = false;
};

enum class FsmCommand {
  Escape,          // arrived at the final node
  AdvanceLook,     // look at the next waypoint
  CommitWalk,      // walk towards the looked-at waypoint
  Continue,        // keep both targets
  RevertPrevious,  // lost sight of the walk target: walk and look at the previous one
  DropLook,        // looked-at target not visible and walk disk left: look back at walk target
};

inline const char* to_string(FsmCommand c) {
  switch (c) {
    case FsmCommand::Escape: return "Escape";
    case FsmCommand::AdvanceLook: return "AdvanceLook";
    case FsmCommand::CommitWalk: return "CommitWalk";
    case FsmCommand::Continue: return "Continue";
    case FsmCommand::RevertPrevious: return "RevertPrevious";
    case FsmCommand::DropLook: return "DropLook";
  }
  return "?";
}

/// The full transition table. has_next: the walk target is not the last
/// waypoint; has_previous: there is an earlier waypoint to fall back to.
///
///   at_final                          -> Escape
///   eq,  in disk,  has_next           -> AdvanceLook   (S1: reached disk k, look at k+1)
///   eq,  in disk,  last waypoint      -> Continue
///   eq,  out,      sees               -> Continue
///   eq,  out,      blind, has_prev    -> RevertPrevious (S2 -> S3)
///   eq,  out,      blind, first       -> Continue
///   !eq, sees                         -> CommitWalk    (S1 -> S2)
///   !eq, blind,    in disk            -> Continue      (wait in disk k)
///   !eq, blind,    out                -> DropLook
inline FsmCommand fsm_transition(const FsmState& s, bool has_next, bool has_previous) {
  if (s.at_final) return FsmCommand::Escape;
  if (s.walk_eq_look) {
    if (s.in_disk) return has_next ? FsmCommand::AdvanceLook : FsmCommand::Continue;
    if (s.can_see) return FsmCommand::Continue;
    return has_previous ? FsmCommand::RevertPrevious : FsmCommand::Continue;
  }
  if (s.can_see) return FsmCommand::CommitWalk;
  return s.in_disk ? FsmCommand::Continue : FsmCommand::DropLook;
}

struct DiskParams {
  double disk_radius = 0.6;   // intermediate waypoints
  double final_radius = 0.25; // last waypoint
};

/// Disk radius for an agent of radius r: max(0.6, 2r).
inline double default_disk_radius(double agent_radius) { return std::max(0.6, 2.0 * agent_radius); }

/// Walk/look targets over a funnel polyline (origin excluded).
struct Navigator {
  std::vector<Vec2> waypoints;
  std::size_t walk = 0;
  std::size_t look = 0;
  DiskParams disks;
  bool arrived = false;

  bool empty() const { return waypoints.empty(); }
  std::size_t last() const { return waypoints.size() - 1; }
  Vec2 walk_target() const { return waypoints[walk]; }
  double radius_of(std::size_t k) const { return k == last() ? disks.final_radius : disks.disk_radius; }
};

using SightOracle = std::function<bool(Vec2, Vec2)>;

inline FsmState observe(const Navigator& nav, Vec2 pos, const SightOracle& sees) {
  FsmState s;
  s.in_disk = distance(pos, nav.waypoints[nav.walk]) <= nav.radius_of(nav.walk);
  s.walk_eq_look = nav.walk == nav.look;
  s.can_see = sees(pos, nav.waypoints[nav.look]);
  s.at_final = s.walk_eq_look && nav.look == nav.last() && s.in_disk;
  return s;
}

/// Runs transitions at pos until the state settles; returns the commands applied.
inline std::vector<FsmCommand> fsm_step(Navigator& nav, Vec2 pos, const SightOracle& sees) {
  std::vector<FsmCommand> applied;
  if (nav.empty() || nav.arrived) return applied;
  // Each waypoint can be advanced past at most once per call.
  const std::size_t budget = 2 * nav.waypoints.size() + 2;
  for (std::size_t iter = 0; iter < budget; ++iter) {
    const FsmState s = observe(nav, pos, sees);
    const FsmCommand c = fsm_transition(s, nav.walk < nav.last(), nav.walk > 0);
    applied.push_back(c);
    switch (c) {
      case FsmCommand::Escape:
        nav.arrived = true;
        return applied;
      case FsmCommand::AdvanceLook:
        nav.look = nav.walk + 1;
        continue;
      case FsmCommand::CommitWalk:
        nav.walk = nav.look;
        continue;
      case FsmCommand::RevertPrevious:
        nav.walk = nav.look = nav.walk - 1;
        return applied;
      case FsmCommand::DropLook:
        nav.look = nav.walk;
        return applied;
      case FsmCommand::Continue:
        return applied;
    }
  }
  return applied;
}

/// Small clockwise turn of every preferred velocity. Exactly opposed agents
/// otherwise meet ORCA constraints with no lateral component and stall; a
/// shared keep-right rule breaks the tie the same way for everyone.
inline constexpr double kKeepRightBias = 0.02;  // rad

/// Velocity towards target at up to v_pref, never overshooting it in one step.
inline Vec2 steer_towards(Vec2 pos, Vec2 target, double v_pref, double dt) {
  const Vec2 d = target - pos;
  const double len = length(d);
  if (len == 0.0) return {};
  return rotate(d * (std::min(v_pref, len / dt) / len), -kKeepRightBias);
}

inline Vec2 preferred_velocity(const Navigator& nav, Vec2 pos, double v_pref, double dt) {
  if (nav.empty() || nav.arrived) return {};
  return steer_towards(pos, nav.walk_target(), v_pref, dt);
}

/// ORCA agents never yield, so bodies wedged in front of a narrow door can
/// hold an arch indefinitely. An agent that has covered less than kDistance
/// within its patience while wanting to move gives way for kDuration, heading
/// somewhere in the half-turn behind its preferred direction. Patience and
/// the give-way heading come from a hash of (id, attempt), so runs stay
/// deterministic while neighbours do not retreat in lockstep.
struct StallMonitor {
  static constexpr double kDistance = 0.1;  // m
  static constexpr double kPatience = 1.0;  // s, shortest
  static constexpr double kStagger = 1.0;   // s, spread of patience
  static constexpr double kDuration = 0.5;  // s, first give-way; later ones in a row last longer
  static constexpr std::uint64_t kMaxEscalation = 6;
  static constexpr double kSpeed = 0.5;     // fraction of the preferred speed

  std::size_t id = 0;
  std::uint64_t attempts = 0;
  std::uint64_t streak = 0;  // give-ways without progress in between
  Vec2 anchor;
  double since = 0.0;
  double patience = kPatience;
  double give_way_until = -1.0;
  double give_way_turn = 0.0;
  bool giving_way = false;

  static double unit_hash(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x ^= x >> 31;
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  void reset(std::size_t agent_id, Vec2 pos, double t) {
    id = agent_id;
    anchor = pos;
    since = t;
    give_way_until = -1.0;
    giving_way = false;
    streak = 0;
    patience = kPatience + kStagger * unit_hash(2 * static_cast<std::uint64_t>(id) * 0x100000001ull);
  }

  Vec2 adjust(Vec2 pos, Vec2 pref, double t) {
    if (t < give_way_until) return rotate(pref, give_way_turn) * kSpeed;
    if (giving_way) {
      giving_way = false;
      anchor = pos;
      since = t;
      return pref;
    }
    if (distance(pos, anchor) > kDistance || abs_sq(pref) == 0.0) {
      streak = 0;
      anchor = pos;
      since = t;
      return pref;
    }
    if (t - since < patience) return pref;
    const std::uint64_t key = (static_cast<std::uint64_t>(id) << 32) ^ ++attempts;
    give_way_turn = std::numbers::pi * (0.5 + unit_hash(key));
    patience = kPatience + kStagger * unit_hash(~key);
    streak = std::min(streak + 1, kMaxEscalation);
    give_way_until = t + kDuration * static_cast<double>(streak);
    giving_way = true;
    return rotate(pref, give_way_turn) * kSpeed;
  }
};

}  // namespace aevac
