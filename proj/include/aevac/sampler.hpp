#pragma once

// Seeded scenario draws: occupant counts and positions per compartment, the
// alarm time and every per-agent parameter, all from one generator stream.
//
// Generator: std::mt19937_64 seeded with the 64-bit seed. Variates are built
// from it explicitly (no <random> distributions, whose algorithms differ
// between standard libraries):
//   uniform01 = (next >> 11) * 2^-53
//   normal    = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)      one variate per pair
//
// Draw order: alarm time, stairway density, then per compartment in index
// order its density followed by its positions (x then y per attempt), then
// per agent in id order: pre-evacuation time, horizontal speed, vertical
// speed, alpha, beta, alternative-route flag.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aevac/error.hpp"
#include "aevac/geometry.hpp"

namespace aevac {

enum class DistKind { Normal, Lognormal, Uniform, Binomial };

inline const char* to_string(DistKind k) {
  switch (k) {
    case DistKind::Normal: return "normal";
    case DistKind::Lognormal: return "lognormal";
    case DistKind::Uniform: return "uniform";
    case DistKind::Binomial: return "binomial";
  }
  return "?";
}

struct DistributionSpec {
  DistKind kind = DistKind::Uniform;
  double p1 = 0.0;  // mean / log-mean / min / success probability
  double p2 = 1.0;  // deviation / log-deviation / max / failure probability
  std::optional<std::pair<double, double>> truncate;  // re-draw outside [lo, hi]
  bool positive = false;                              // re-draw values <= 0

  bool operator==(const DistributionSpec&) const = default;
};

inline void validate(const DistributionSpec& d, const std::string& name) {
  auto bad = [&](const std::string& why) { throw ConfigError("distribution " + name + ": " + why); };
  if (!std::isfinite(d.p1) || !std::isfinite(d.p2)) bad("non-finite parameter");
  switch (d.kind) {
    case DistKind::Normal:
    case DistKind::Lognormal:
      if (!(d.p2 > 0.0)) bad("deviation must be positive");
      break;
    case DistKind::Uniform:
      if (d.p1 > d.p2) bad("min exceeds max");
      break;
    case DistKind::Binomial:
      if (d.p1 < 0.0 || d.p1 > 1.0 || std::abs(d.p1 + d.p2 - 1.0) > 1e-9) bad("probabilities must sum to 1");
      break;
  }
  if (d.truncate && d.truncate->first > d.truncate->second) bad("empty truncation interval");
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double standard_normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// Normal variates are limited to mean +- 3 sd by re-drawing.
inline double draw(const DistributionSpec& d, Rng& rng) {
  constexpr int kMaxRedraws = 100000;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    double x = 0.0;
    switch (d.kind) {
      case DistKind::Normal: {
        const double z = rng.standard_normal();
        if (std::abs(z) > 3.0) continue;
        x = d.p1 + d.p2 * z;
        break;
      }
      case DistKind::Lognormal:
        x = std::exp(d.p1 + d.p2 * rng.standard_normal());
        break;
      case DistKind::Uniform:
        x = d.p1 + (d.p2 - d.p1) * rng.uniform01();
        break;
      case DistKind::Binomial:
        x = rng.uniform01() < d.p1 ? 1.0 : 0.0;
        break;
    }
    if (d.positive && !(x > 0.0)) continue;
    if (d.truncate && (x < d.truncate->first || x > d.truncate->second)) continue;
    return x;
  }
  throw ConfigError("distribution keeps drawing outside its bounds");
}

/// Row names of the distribution library, in table order.
inline const std::vector<std::string>& distribution_rows() {
  static const std::vector<std::string> rows{
      "room_density",     "corridor_density", "stairway_density",   "location_x",      "location_y",
      "alarm_time",       "pre_evac_fire_room", "pre_evac_other",   "horizontal_speed", "vertical_speed",
      "alpha",            "beta",             "alternative_route"};
  return rows;
}

struct DistributionLibrary {
  std::map<std::string, DistributionSpec> rows;

  const DistributionSpec& at(const std::string& row) const {
    const auto it = rows.find(row);
    if (it == rows.end()) throw ConfigError("distribution library has no row " + row);
    return it->second;
  }
};

/// The office preset. Location rows are fractions of the placement region;
/// densities in m2 per person; alarm time in minutes; times otherwise seconds.
inline DistributionLibrary office_preset() {
  DistributionLibrary lib;
  auto normal = [](double m, double s, bool positive) {
    return DistributionSpec{DistKind::Normal, m, s, std::nullopt, positive};
  };
  lib.rows["room_density"] = normal(5.0, 2.0, true);
  lib.rows["corridor_density"] = normal(20.0, 3.0, true);
  lib.rows["stairway_density"] = normal(50.0, 3.0, true);
  lib.rows["location_x"] = {DistKind::Uniform, 0.0, 1.0, std::nullopt, false};
  lib.rows["location_y"] = {DistKind::Uniform, 0.0, 1.0, std::nullopt, false};
  lib.rows["alarm_time"] = {DistKind::Lognormal, 0.7, 0.2, std::nullopt, false};
  lib.rows["pre_evac_fire_room"] = {DistKind::Uniform, 0.0, 30.0, std::nullopt, false};
  lib.rows["pre_evac_other"] = {DistKind::Lognormal, 3.04, 0.142, std::nullopt, false};
  lib.rows["horizontal_speed"] = normal(1.2, 0.2, true);
  lib.rows["vertical_speed"] = normal(0.7, 0.2, true);
  lib.rows["alpha"] = normal(0.706, 0.069, true);
  lib.rows["beta"] = normal(-0.057, 0.015, false);
  lib.rows["alternative_route"] = {DistKind::Binomial, 0.03, 0.97, std::nullopt, false};
  return lib;
}

inline constexpr const char* kDistributionSchema = "aevac-distributions/1";

inline DistributionSpec parse_distribution(const nlohmann::json& j, const std::string& name) {
  if (!j.is_object()) throw ConfigError("distribution " + name + ": expected an object");
  for (const auto& [key, unused] : j.items()) {
    if (key != "kind" && key != "p1" && key != "p2" && key != "truncate" && key != "positive") {
      throw ConfigError("distribution " + name + ": unknown key " + key);
    }
  }
  DistributionSpec d;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "normal") {
      d.kind = DistKind::Normal;
    } else if (kind == "lognormal") {
      d.kind = DistKind::Lognormal;
    } else if (kind == "uniform") {
      d.kind = DistKind::Uniform;
    } else if (kind == "binomial") {
      d.kind = DistKind::Binomial;
    } else {
      throw ConfigError("distribution " + name + ": unknown kind " + kind);
    }
    d.p1 = j.at("p1").get<double>();
    d.p2 = j.at("p2").get<double>();
    if (j.contains("truncate")) {
      const auto& t = j.at("truncate");
      if (!t.is_array() || t.size() != 2) throw ConfigError("distribution " + name + ": truncate must be [lo, hi]");
      d.truncate = std::pair{t[0].get<double>(), t[1].get<double>()};
    }
    if (j.contains("positive")) d.positive = j.at("positive").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("distribution " + name + ": " + e.what());
  }
  validate(d, name);
  return d;
}

inline nlohmann::ordered_json distribution_json(const DistributionSpec& d) {
  nlohmann::ordered_json j{{"kind", to_string(d.kind)}, {"p1", d.p1}, {"p2", d.p2}};
  if (d.truncate) j["truncate"] = {d.truncate->first, d.truncate->second};
  if (d.positive) j["positive"] = true;
  return j;
}

/// {"schema": "aevac-distributions/1", "presets": {name: {row: spec, ...}}}
inline DistributionLibrary parse_distribution_library(const std::string& text, const std::string& preset) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("distribution library: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kDistributionSchema) {
    throw ConfigError(std::string("distribution library: schema must be ") + kDistributionSchema);
  }
  if (!doc.contains("presets") || !doc["presets"].contains(preset)) {
    throw ConfigError("distribution library: no preset " + preset);
  }
  const auto& rows = doc["presets"][preset];
  if (!rows.is_object()) throw ConfigError("distribution library: preset " + preset + " is not an object");
  DistributionLibrary lib;
  for (const auto& [name, spec] : rows.items()) {
    const auto& known = distribution_rows();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("distribution library: unknown row " + name);
    }
    lib.rows[name] = parse_distribution(spec, name);
  }
  for (const auto& name : distribution_rows()) {
    if (!lib.rows.count(name)) throw ConfigError("distribution library: preset " + preset + " lacks row " + name);
  }
  return lib;
}

inline nlohmann::ordered_json distribution_library_json(const DistributionLibrary& lib, const std::string& preset) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::object();
  for (const auto& name : distribution_rows()) rows[name] = distribution_json(lib.at(name));
  return {{"schema", kDistributionSchema}, {"presets", {{preset, rows}}}};
}

struct AgentSample {
  std::size_t id = 0;
  Vec2 position;
  std::size_t compartment = 0;
  double pre_evac = 0.0;
  double v_horizontal = 1.2;
  double v_vertical = 0.7;
  double alpha = 0.706;
  double beta = -0.057;
  bool alternative_route = false;
  double radius = 0.25;

  bool operator==(const AgentSample&) const = default;
};

struct CompartmentDraw {
  std::size_t compartment = 0;
  double density = 0.0;  // the accepted draw, m2 per person
  std::size_t count = 0;
  std::size_t density_redraws = 0;

  bool operator==(const CompartmentDraw&) const = default;
};

struct ScenarioSample {
  std::uint64_t seed = 0;
  double alarm_time = 0.0;  // s
  double stairway_density = 0.0;
  std::vector<CompartmentDraw> compartments;
  std::vector<AgentSample> agents;

  bool operator==(const ScenarioSample&) const = default;
};

struct SamplerConfig {
  DistributionLibrary distributions = office_preset();
  std::string fire_origin;  // compartment name, e.g. "ROOM0"
  double agent_radius = 0.25;
  double wall_thickness = 0.2;
  int placement_attempts = 1000;
  int max_density_redraws = 100;
};

/// Region where an agent centre may spawn: the footprint minus the wall
/// half-thickness and the agent radius.
inline Rect placement_region(const FloorPlan& plan, std::size_t compartment, double wall_thickness, double radius) {
  return plan.compartment(compartment).footprint().shrunk(0.5 * wall_thickness + radius);
}

/// floor(area / density), never negative.
inline std::size_t occupant_count(double area, double density) {
  if (!(density > 0.0)) throw InputError("density draw must be positive");
  const double n = std::floor(area / density);
  return n > 0.0 ? static_cast<std::size_t>(n) : 0;
}

inline ScenarioSample sample_scenario(std::uint64_t seed, const FloorPlan& plan, const SamplerConfig& cfg) {
  for (const auto& name : distribution_rows()) validate(cfg.distributions.at(name), name);
  const auto origin = plan.find_compartment(cfg.fire_origin);
  if (!origin) throw ConfigError("fire origin " + cfg.fire_origin + " is not a compartment of " + plan.floor_id);
  if (!(cfg.agent_radius > 0.0)) throw ConfigError("agent radius must be positive");

  const DistributionLibrary& lib = cfg.distributions;
  Rng rng(seed);
  ScenarioSample out;
  out.seed = seed;
  out.alarm_time = 60.0 * draw(lib.at("alarm_time"), rng);
  out.stairway_density = draw(lib.at("stairway_density"), rng);

  const double r = cfg.agent_radius;
  for (std::size_t c = 0; c < plan.compartment_count(); ++c) {
    const bool room = plan.compartment_kind(c) == CompartmentKind::Room;
    const DistributionSpec& density_row = lib.at(room ? "room_density" : "corridor_density");
    const Rect footprint = plan.compartment(c).footprint();
    const Rect region = placement_region(plan, c, cfg.wall_thickness, r);
    CompartmentDraw cd;
    cd.compartment = c;
    std::vector<Vec2> placed;
    for (;;) {
      cd.density = draw(density_row, rng);
      cd.count = occupant_count(footprint.area(), cd.density);
      placed.clear();
      bool ok = cd.count == 0 || (region.width() >= 0.0 && region.height() >= 0.0);
      for (std::size_t k = 0; ok && k < cd.count; ++k) {
        bool done = false;
        for (int attempt = 0; attempt < cfg.placement_attempts && !done; ++attempt) {
          const Vec2 p{region.lo.x + region.width() * draw(lib.at("location_x"), rng),
                       region.lo.y + region.height() * draw(lib.at("location_y"), rng)};
          done = std::none_of(placed.begin(), placed.end(), [&](Vec2 q) { return distance(p, q) < 2.0 * r; });
          if (done) placed.push_back(p);
        }
        ok = done;
      }
      if (ok) break;
      if (static_cast<int>(++cd.density_redraws) > cfg.max_density_redraws) {
        throw InputError(plan.compartment_name(c) + ": cannot place occupants without overlap");
      }
    }
    for (const Vec2& p : placed) {
      AgentSample a;
      a.id = out.agents.size();
      a.position = p;
      a.compartment = c;
      a.radius = r;
      out.agents.push_back(a);
    }
    out.compartments.push_back(cd);
  }

  for (AgentSample& a : out.agents) {
    a.pre_evac = draw(lib.at(a.compartment == *origin ? "pre_evac_fire_room" : "pre_evac_other"), rng);
    a.v_horizontal = draw(lib.at("horizontal_speed"), rng);
    a.v_vertical = draw(lib.at("vertical_speed"), rng);
    a.alpha = draw(lib.at("alpha"), rng);
    a.beta = draw(lib.at("beta"), rng);
    a.alternative_route = draw(lib.at("alternative_route"), rng) != 0.0;
  }
  return out;
}

inline nlohmann::ordered_json sample_json(const ScenarioSample& s, const FloorPlan& plan) {
  nlohmann::ordered_json comps = nlohmann::ordered_json::array();
  for (const auto& c : s.compartments) {
    comps.push_back({{"compartment", plan.compartment_name(c.compartment)},
                     {"density", c.density},
                     {"count", c.count},
                     {"density_redraws", c.density_redraws}});
  }
  nlohmann::ordered_json agents = nlohmann::ordered_json::array();
  for (const auto& a : s.agents) {
    agents.push_back({{"id", a.id},
                      {"x", a.position.x},
                      {"y", a.position.y},
                      {"compartment", plan.compartment_name(a.compartment)},
                      {"pre_evac", a.pre_evac},
                      {"v_horizontal", a.v_horizontal},
                      {"v_vertical", a.v_vertical},
                      {"alpha", a.alpha},
                      {"beta", a.beta},
                      {"alternative_route", a.alternative_route},
                      {"radius", a.radius}});
  }
  return {{"seed", s.seed},
          {"alarm_time", s.alarm_time},
          {"stairway_density", s.stairway_density},
          {"compartments", comps},
          {"agents", agents}};
}

inline ScenarioSample sample_from_json(const nlohmann::json& j, const FloorPlan& plan) {
  auto comp = [&](const nlohmann::json& v) {
    const auto c = plan.find_compartment(v.get<std::string>());
    if (!c) throw InputError("ledger: unknown compartment " + v.get<std::string>());
    return *c;
  };
  ScenarioSample s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.alarm_time = j.at("alarm_time").get<double>();
    s.stairway_density = j.at("stairway_density").get<double>();
    for (const auto& c : j.at("compartments")) {
      s.compartments.push_back({comp(c.at("compartment")), c.at("density").get<double>(),
                                c.at("count").get<std::size_t>(), c.at("density_redraws").get<std::size_t>()});
    }
    for (const auto& a : j.at("agents")) {
      AgentSample x;
      x.id = a.at("id").get<std::size_t>();
      x.position = {a.at("x").get<double>(), a.at("y").get<double>()};
      x.compartment = comp(a.at("compartment"));
      x.pre_evac = a.at("pre_evac").get<double>();
      x.v_horizontal = a.at("v_horizontal").get<double>();
      x.v_vertical = a.at("v_vertical").get<double>();
      x.alpha = a.at("alpha").get<double>();
      x.beta = a.at("beta").get<double>();
      x.alternative_route = a.at("alternative_route").get<bool>();
      x.radius = a.at("radius").get<double>();
      s.agents.push_back(x);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("ledger: ") + e.what());
  }
  return s;
}

}  // namespace aevac
