#pragma once

// Floor-plan document model and the room-interior -> wall-obstacle conversion.
//
// A floor-plan document maps each floor label to entity lists:
//
//   {"FLOOR 1": {"ROOM": [[[x0,y0,z0],[x1,y1,z1]], ...], "COR": [...],
//                "D": [...], "W": [...], "HOLE": [...]}}
//
// ROOM and COR are compartments (box interiors). D, W and HOLE are vents;
// a vent is planar in one horizontal axis and sits on a compartment face.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aevac/error.hpp"
#include "aevac/vec2.hpp"

namespace aevac {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct Box3 {
  Vec3 lo;
  Vec3 hi;

  static Box3 normalized(Vec3 a, Vec3 b) {
    return {{std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)},
            {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}};
  }
  Rect footprint() const { return {{lo.x, lo.y}, {hi.x, hi.y}}; }
  double height() const { return hi.z - lo.z; }
  bool operator==(const Box3&) const = default;
};

enum class CompartmentKind { Room, Corridor };

struct FloorPlan {
  std::string floor_id;
  std::vector<Box3> rooms;
  std::vector<Box3> corridors;
  std::vector<Box3> doors;
  std::vector<Box3> windows;
  std::vector<Box3> holes;

  /// Compartments are indexed rooms first, then corridors.
  std::size_t compartment_count() const { return rooms.size() + corridors.size(); }
  const Box3& compartment(std::size_t i) const {
    return i < rooms.size() ? rooms[i] : corridors[i - rooms.size()];
  }
  CompartmentKind compartment_kind(std::size_t i) const {
    return i < rooms.size() ? CompartmentKind::Room : CompartmentKind::Corridor;
  }
  /// "ROOM<i>" or "COR<i>", the identifiers used by fire histories and configs.
  std::string compartment_name(std::size_t i) const {
    return i < rooms.size() ? "ROOM" + std::to_string(i)
                            : "COR" + std::to_string(i - rooms.size());
  }
  std::optional<std::size_t> find_compartment(std::string_view name) const {
    for (std::size_t i = 0; i < compartment_count(); ++i) {
      if (compartment_name(i) == name) return i;
    }
    return std::nullopt;
  }

  bool operator==(const FloorPlan&) const = default;
};

namespace detail {

inline constexpr double kGeomEps = 1e-9;

inline Vec3 parse_triplet(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw InputError(where + ": expected [x, y, z]");
  }
  for (const auto& c : j) {
    if (!c.is_number()) throw InputError(where + ": coordinates must be numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::ordered_json triplet_json(const Vec3& v) {
  return nlohmann::ordered_json::array({v.x, v.y, v.z});
}

inline bool interiors_overlap(const Box3& a, const Box3& b) {
  return a.lo.x < b.hi.x - kGeomEps && b.lo.x < a.hi.x - kGeomEps &&
         a.lo.y < b.hi.y - kGeomEps && b.lo.y < a.hi.y - kGeomEps &&
         a.lo.z < b.hi.z - kGeomEps && b.lo.z < a.hi.z - kGeomEps;
}

}  // namespace detail

inline void validate_floor_plan(const FloorPlan& plan) {
  for (std::size_t i = 0; i < plan.compartment_count(); ++i) {
    const Box3& b = plan.compartment(i);
    if (b.hi.x - b.lo.x <= detail::kGeomEps || b.hi.y - b.lo.y <= detail::kGeomEps ||
        b.hi.z - b.lo.z <= detail::kGeomEps) {
      throw InputError(plan.floor_id + ": compartment " + plan.compartment_name(i) +
                       " has zero volume");
    }
  }
  for (std::size_t i = 0; i < plan.compartment_count(); ++i) {
    for (std::size_t j = i + 1; j < plan.compartment_count(); ++j) {
      if (detail::interiors_overlap(plan.compartment(i), plan.compartment(j))) {
        throw InputError(plan.floor_id + ": compartments " + plan.compartment_name(i) + " and " +
                         plan.compartment_name(j) + " overlap");
      }
    }
  }
  auto check_vents = [&](const std::vector<Box3>& vents, const char* key) {
    for (std::size_t i = 0; i < vents.size(); ++i) {
      const Box3& v = vents[i];
      if (v.hi.x - v.lo.x <= detail::kGeomEps && v.hi.y - v.lo.y <= detail::kGeomEps) {
        throw InputError(plan.floor_id + ": " + key + "[" + std::to_string(i) +
                         "] is degenerate in both horizontal axes");
      }
    }
  };
  check_vents(plan.doors, "D");
  check_vents(plan.windows, "W");
  check_vents(plan.holes, "HOLE");
}

/// Parses every floor of a floor-plan document, in document order.
inline std::vector<FloorPlan> parse_floor_plans(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("floor plan is not well-formed: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("floor plan: top level must be a map of floors");

  std::vector<FloorPlan> floors;
  for (const auto& [label, entities] : doc.items()) {
    if (!entities.is_object()) throw InputError(label + ": floor must be a map of entities");
    FloorPlan plan;
    plan.floor_id = label;
    for (const auto& [key, list] : entities.items()) {
      std::vector<Box3>* target = nullptr;
      if (key == "ROOM") target = &plan.rooms;
      else if (key == "COR") target = &plan.corridors;
      else if (key == "D") target = &plan.doors;
      else if (key == "W") target = &plan.windows;
      else if (key == "HOLE") target = &plan.holes;
      else throw InputError(label + ": unknown entity key '" + key + "'");
      if (!list.is_array()) throw InputError(label + "/" + key + ": expected a list of boxes");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = label + "/" + key + "[" + std::to_string(i) + "]";
        const auto& pair = list[i];
        if (!pair.is_array() || pair.size() != 2) {
          throw InputError(where + ": expected [[x0,y0,z0],[x1,y1,z1]]");
        }
        target->push_back(
            Box3::normalized(detail::parse_triplet(pair[0], where), detail::parse_triplet(pair[1], where)));
      }
    }
    validate_floor_plan(plan);
    floors.push_back(std::move(plan));
  }
  return floors;
}

/// Parses a document and returns its first floor (an empty document is an error).
inline FloorPlan parse_floor_plan(std::string_view text) {
  auto floors = parse_floor_plans(text);
  if (floors.empty()) throw InputError("floor plan contains no floors");
  return std::move(floors.front());
}

inline std::string serialize_floor_plans(const std::vector<FloorPlan>& floors) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const FloorPlan& plan : floors) {
    nlohmann::ordered_json entities = nlohmann::ordered_json::object();
    auto emit = [&](const char* key, const std::vector<Box3>& boxes) {
      if (boxes.empty()) return;
      auto list = nlohmann::ordered_json::array();
      for (const Box3& b : boxes) {
        list.push_back({detail::triplet_json(b.lo), detail::triplet_json(b.hi)});
      }
      entities[key] = std::move(list);
    };
    emit("ROOM", plan.rooms);
    emit("COR", plan.corridors);
    emit("D", plan.doors);
    emit("W", plan.windows);
    emit("HOLE", plan.holes);
    doc[plan.floor_id] = std::move(entities);
  }
  return doc.dump(2);
}

inline std::string serialize_floor_plan(const FloorPlan& plan) { return serialize_floor_plans({plan}); }

/// Compartment whose closed footprint contains p; ties go to the lowest index.
inline std::optional<std::size_t> locate_compartment(const FloorPlan& plan, Vec2 p) {
  for (std::size_t i = 0; i < plan.compartment_count(); ++i) {
    if (plan.compartment(i).footprint().contains_closed(p)) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Vents on faces

enum class VentKind { Door, Window, Hole };

/// Where a vent sits: on the line `coord` of axis `normal_axis` (0 = x, 1 = y),
/// spanning [span_lo, span_hi] along the other axis.
struct VentPlacement {
  VentKind kind;
  std::size_t index;
  int normal_axis;
  double coord;
  double span_lo;
  double span_hi;
  /// Compartments having a face on this line that covers the span.
  std::vector<std::size_t> compartments;
  /// Unit normal pointing away from the (single) adjacent compartment, for exits.
  Vec2 outward{0.0, 0.0};

  bool is_exit() const { return kind != VentKind::Window && compartments.size() == 1; }
  Vec2 center() const {
    const double mid = 0.5 * (span_lo + span_hi);
    return normal_axis == 1 ? Vec2{mid, coord} : Vec2{coord, mid};
  }
};

/// Locates a vent on the compartment faces. Compartment list is empty when the
/// vent does not lie on any face.
inline VentPlacement place_vent(const FloorPlan& plan, VentKind kind, std::size_t index) {
  const Box3& v = kind == VentKind::Door ? plan.doors[index]
                : kind == VentKind::Hole ? plan.holes[index]
                                         : plan.windows[index];
  const double ex = v.hi.x - v.lo.x;
  const double ey = v.hi.y - v.lo.y;
  VentPlacement out{kind, index, ey <= ex ? 1 : 0, 0.0, 0.0, 0.0, {}, {}};
  const double thin_lo = out.normal_axis == 1 ? v.lo.y : v.lo.x;
  const double thin_hi = out.normal_axis == 1 ? v.hi.y : v.hi.x;
  out.coord = 0.5 * (thin_lo + thin_hi);
  out.span_lo = out.normal_axis == 1 ? v.lo.x : v.lo.y;
  out.span_hi = out.normal_axis == 1 ? v.hi.x : v.hi.y;

  constexpr double tol = 1e-6;
  for (std::size_t c = 0; c < plan.compartment_count(); ++c) {
    const Rect f = plan.compartment(c).footprint();
    const double face_a = out.normal_axis == 1 ? f.lo.y : f.lo.x;
    const double face_b = out.normal_axis == 1 ? f.hi.y : f.hi.x;
    const double along_lo = out.normal_axis == 1 ? f.lo.x : f.lo.y;
    const double along_hi = out.normal_axis == 1 ? f.hi.x : f.hi.y;
    const bool on_a = face_a >= thin_lo - tol && face_a <= thin_hi + tol;
    const bool on_b = face_b >= thin_lo - tol && face_b <= thin_hi + tol;
    if (!on_a && !on_b) continue;
    if (out.span_lo < along_lo - tol || out.span_hi > along_hi + tol) continue;
    const double face = on_a ? face_a : face_b;
    out.coord = face;
    out.compartments.push_back(c);
    // The compartment lies on the +normal side when the vent is on its low face.
    const double sign = on_a ? -1.0 : 1.0;
    out.outward = out.normal_axis == 1 ? Vec2{0.0, sign} : Vec2{sign, 0.0};
  }
  if (out.compartments.size() != 1) out.outward = {0.0, 0.0};
  return out;
}

/// Doors and holes, in (doors, holes) order, with their face placement.
inline std::vector<VentPlacement> passable_vents(const FloorPlan& plan) {
  std::vector<VentPlacement> out;
  for (std::size_t i = 0; i < plan.doors.size(); ++i) out.push_back(place_vent(plan, VentKind::Door, i));
  for (std::size_t i = 0; i < plan.holes.size(); ++i) out.push_back(place_vent(plan, VentKind::Hole, i));
  return out;
}

// ---------------------------------------------------------------------------
// Obstacles

struct ObstacleSet {
  std::vector<Rect> rectangles;
  std::vector<Vec2> corner_bag;
};

/// Deduplicated, lexicographically sorted corners of all rectangles.
inline std::vector<Vec2> corner_bag_of(const std::vector<Rect>& rects) {
  std::vector<Vec2> bag;
  bag.reserve(rects.size() * 4);
  for (const Rect& r : rects) {
    bag.push_back(r.lo);
    bag.push_back({r.hi.x, r.lo.y});
    bag.push_back(r.hi);
    bag.push_back({r.lo.x, r.hi.y});
  }
  std::sort(bag.begin(), bag.end());
  bag.erase(std::unique(bag.begin(), bag.end()), bag.end());
  return bag;
}

/// The opening cut through the wall band for a door or hole.
inline Rect vent_gap(const VentPlacement& v, double wall_thickness) {
  const double h = 0.5 * wall_thickness;
  return v.normal_axis == 1 ? Rect{{v.span_lo, v.coord - h}, {v.span_hi, v.coord + h}}
                            : Rect{{v.coord - h, v.span_lo}, {v.coord + h, v.span_hi}};
}

/// Wall rectangles of the given thickness centred on every compartment face,
/// with door and hole openings removed. Windows leave the wall intact.
inline ObstacleSet to_obstacles(const FloorPlan& plan, double wall_thickness) {
  if (!(wall_thickness > 0.0)) throw GeometryError("wall thickness must be positive");
  const double h = 0.5 * wall_thickness;

  // walls[0] run along x (bottom/top faces), walls[1] run along y (left/right faces).
  std::array<std::vector<Rect>, 2> walls;
  for (std::size_t c = 0; c < plan.compartment_count(); ++c) {
    const Rect f = plan.compartment(c).footprint();
    walls[0].push_back({{f.lo.x - h, f.lo.y - h}, {f.hi.x + h, f.lo.y + h}});
    walls[0].push_back({{f.lo.x - h, f.hi.y - h}, {f.hi.x + h, f.hi.y + h}});
    walls[1].push_back({{f.lo.x - h, f.lo.y - h}, {f.lo.x + h, f.hi.y + h}});
    walls[1].push_back({{f.hi.x - h, f.lo.y - h}, {f.hi.x + h, f.hi.y + h}});
  }
  // A vent cut never removes the perpendicular walls it abuts.
  std::array<std::vector<Rect>, 2> cuts;
  for (const VentPlacement& v : passable_vents(plan)) {
    if (v.compartments.empty()) {
      throw GeometryError(plan.floor_id + ": " + (v.kind == VentKind::Door ? "D[" : "HOLE[") +
                          std::to_string(v.index) + "] is not on any compartment face");
    }
    cuts[v.normal_axis == 1 ? 0 : 1].push_back(vent_gap(v, wall_thickness));
  }

  // Rasterize the union on the grid of all rectangle edges, then merge cells.
  // Edges are snapped to the triangulation lattice first.
  for (auto* list : {&walls[0], &walls[1], &cuts[0], &cuts[1]}) {
    for (Rect& r : *list) {
      r = {{snap_to_lattice(r.lo.x), snap_to_lattice(r.lo.y)}, {snap_to_lattice(r.hi.x), snap_to_lattice(r.hi.y)}};
    }
  }
  std::vector<double> xs, ys;
  for (const auto* list : {&walls[0], &walls[1], &cuts[0], &cuts[1]}) {
    for (const Rect& r : *list) {
      xs.push_back(r.lo.x); xs.push_back(r.hi.x);
      ys.push_back(r.lo.y); ys.push_back(r.hi.y);
    }
  }
  auto uniq = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
            v.end());
  };
  uniq(xs);
  uniq(ys);
  ObstacleSet out;
  if (xs.size() < 2 || ys.size() < 2) return out;

  const std::size_t nx = xs.size() - 1, ny = ys.size() - 1;
  std::vector<char> solid(nx * ny, 0);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const Vec2 c{0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])};
      auto hit = [&](const std::vector<Rect>& rs) {
        return std::any_of(rs.begin(), rs.end(), [&](const Rect& r) { return r.contains_open(c); });
      };
      const bool along_x = hit(walls[0]), along_y = hit(walls[1]);
      const bool cut = (hit(cuts[0]) && !along_y) || (hit(cuts[1]) && !along_x);
      solid[j * nx + i] = (along_x || along_y) && !cut;
    }
  }
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      if (!solid[j * nx + i]) continue;
      std::size_t i1 = i;
      while (i1 + 1 < nx && solid[j * nx + i1 + 1]) ++i1;
      std::size_t j1 = j;
      auto row_full = [&](std::size_t row) {
        for (std::size_t k = i; k <= i1; ++k) {
          if (!solid[row * nx + k]) return false;
        }
        return true;
      };
      while (j1 + 1 < ny && row_full(j1 + 1)) ++j1;
      for (std::size_t r = j; r <= j1; ++r) {
        for (std::size_t k = i; k <= i1; ++k) solid[r * nx + k] = 0;
      }
      out.rectangles.push_back({{xs[i], ys[j]}, {xs[i1 + 1], ys[j1 + 1]}});
    }
  }
  out.corner_bag = corner_bag_of(out.rectangles);
  return out;
}

}  // namespace aevac
