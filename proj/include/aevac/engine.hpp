#pragma once

// One evacuation run: the fixed-step loop that couples pre-evacuation delay,
// routing, ORCA, smoke-slowed walking speeds and FED dosing.
//
// Per step (t -> t + dt):
//   state     Waiting agents whose delay is over start Moving and get a route;
//             scheduled exit closures take effect
//   goals     waypoint FSM, escape check, preferred velocities
//   velocity  ORCA over every body still on the floor
//   position  explicit Euler
//   every env_update_stride steps, at the new time: v_pref and FED updates

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aevac/crowd.hpp"
#include "aevac/fireenv.hpp"
#include "aevac/funnel.hpp"
#include "aevac/geometry.hpp"
#include "aevac/navmesh.hpp"
#include "aevac/sampler.hpp"

namespace aevac {

enum class AgentStatus { Waiting, Moving, Incapacitated, Dead, Escaped };

inline const char* to_string(AgentStatus s) {
  switch (s) {
    case AgentStatus::Waiting: return "Waiting";
    case AgentStatus::Moving: return "Moving";
    case AgentStatus::Incapacitated: return "Incapacitated";
    case AgentStatus::Dead: return "Dead";
    case AgentStatus::Escaped: return "Escaped";
  }
  return "?";
}

inline AgentStatus parse_agent_status(const std::string& s) {
  for (AgentStatus a : {AgentStatus::Waiting, AgentStatus::Moving, AgentStatus::Incapacitated, AgentStatus::Dead,
                        AgentStatus::Escaped}) {
    if (s == to_string(a)) return a;
  }
  throw InputError("unknown agent status " + s);
}

inline bool is_terminal(AgentStatus s) { return s == AgentStatus::Dead || s == AgentStatus::Escaped; }

inline constexpr double kIncapacitationFed = 0.3;
inline constexpr double kLethalFed = 1.0;

struct ExitClosure {
  double time = 0.0;
  std::size_t exit = 0;
};

struct EngineConfig {
  double dt = 0.05;
  std::size_t env_update_stride = 20;
  double breathing_height = 1.8;
  double max_sim_time = 1800.0;
  OrcaParams orca;
  bool keep_frames = false;
  std::vector<ExitClosure> exit_closures;
};

inline void validate(const EngineConfig& c) {
  if (!(c.dt > 0.0)) throw ConfigError("dt must be positive");
  if (c.env_update_stride < 1) throw ConfigError("env_update_stride must be at least 1");
  if (!(c.max_sim_time > 0.0)) throw ConfigError("max_sim_time must be positive");
  if (!(c.breathing_height >= 0.0)) throw ConfigError("breathing_height must be non-negative");
}

struct AgentOutcome {
  std::size_t id = 0;
  AgentStatus status = AgentStatus::Waiting;
  std::optional<double> egress_time;
  double fed_total = 0.0;
  HealthEffect health = HealthEffect::Minor;
  /// Still Waiting or Moving when the horizon was reached.
  bool unresolved = false;

  bool operator==(const AgentOutcome&) const = default;
};

struct FrameAgent {
  std::size_t id;
  Vec2 position;
  AgentStatus status;
  double fed_total;

  bool operator==(const FrameAgent&) const = default;
};

struct Frame {
  double time;
  std::vector<FrameAgent> agents;

  bool operator==(const Frame&) const = default;
};

struct SimulationOutcome {
  std::uint64_t seed = 0;
  std::vector<AgentOutcome> agents;
  std::optional<double> rset;
  std::size_t fatalities = 0;
  std::size_t steps = 0;
  double end_time = 0.0;
  std::vector<std::string> warnings;
  std::optional<std::vector<Frame>> frames;

  bool operator==(const SimulationOutcome&) const = default;
};

class Simulation {
 public:
  Simulation(const FloorPlan& plan, const NavMesh& nav, const FireHistory& history, const ScenarioSample& sample,
             EngineConfig config)
      : plan_(&plan),
        history_(&history),
        wall_thickness_(nav.wall_thickness),
        config_(std::move(config)),
        graph_(nav.graph, nav.mesh),
        field_(ObstacleField::from_rects(nav.obstacles.rectangles)),
        seed_(sample.seed),
        alarm_time_(sample.alarm_time) {
    validate(config_);
    for (const ExitClosure& c : config_.exit_closures) {
      if (c.exit >= nav.exits.size()) throw ConfigError("exit closure names exit " + std::to_string(c.exit) +
                                                        " but the floor has " + std::to_string(nav.exits.size()));
    }
    std::stable_sort(config_.exit_closures.begin(), config_.exit_closures.end(),
                     [](const ExitClosure& a, const ExitClosure& b) { return a.time < b.time; });
    exit_open_.assign(nav.exits.size(), 1);
    agents_.reserve(sample.agents.size());
    for (const AgentSample& s : sample.agents) {
      if (s.compartment >= plan.compartment_count()) {
        throw InputError("agent " + std::to_string(s.id) + " names a compartment outside the floor");
      }
      Agent a;
      a.sample = s;
      a.compartment = s.compartment;
      a.body.id = s.id;
      a.body.position = s.position;
      a.body.radius = s.radius;
      a.body.is_static = true;
      a.disks = {default_disk_radius(s.radius), DiskParams{}.final_radius};
      a.v_pref = walking_speed(s.v_horizontal, local(a, 0.0).ks, {s.alpha, s.beta});
      agents_.push_back(std::move(a));
    }
    if (config_.keep_frames) frames_.emplace();
  }

  bool done() const { return finished_; }
  double time() const { return static_cast<double>(steps_) * config_.dt; }
  std::size_t steps() const { return steps_; }
  std::size_t agent_count() const { return agents_.size(); }
  AgentStatus status(std::size_t i) const { return agents_[i].status; }
  Vec2 position(std::size_t i) const { return agents_[i].body.position; }
  Vec2 velocity(std::size_t i) const { return agents_[i].body.velocity; }
  Vec2 preferred_velocity_of(std::size_t i) const { return agents_[i].body.pref_velocity; }
  const Navigator& navigator(std::size_t i) const { return agents_[i].nav; }
  double speed_limit(std::size_t i) const { return agents_[i].v_pref; }
  double fed_total(std::size_t i) const { return agents_[i].fed.total; }
  const std::vector<Vec2>& route(std::size_t i) const { return agents_[i].nav.waypoints; }
  int route_exit(std::size_t i) const { return agents_[i].exit; }

  /// Marks exit k unavailable now; agents heading for it re-plan at the next goals phase.
  void close_exit(std::size_t k) {
    if (k >= exit_open_.size()) throw ConfigError("no exit " + std::to_string(k));
    if (!exit_open_[k]) return;
    exit_open_[k] = 0;
    graph_.block_exit(k);
    for (Agent& a : agents_) {
      if (a.status == AgentStatus::Moving && a.exit == static_cast<int>(k)) a.needs_route = true;
    }
  }

  void step() {
    if (finished_) return;
    const double t = time();
    state_phase(t);
    goals_phase(t);
    velocity_and_position_phase();
    ++steps_;
    if (steps_ % config_.env_update_stride == 0) environment_phase(time());
    if (frames_) record_frame();
    finished_ = std::all_of(agents_.begin(), agents_.end(), [](const Agent& a) { return is_terminal(a.status); }) ||
                time() >= config_.max_sim_time - 1e-9 * config_.dt;
  }

  SimulationOutcome run() {
    finished_ = finished_ || agents_.empty();
    while (!finished_) step();
    return outcome();
  }

  SimulationOutcome outcome() const {
    SimulationOutcome o;
    o.seed = seed_;
    o.steps = steps_;
    o.end_time = time();
    o.warnings = warnings_;
    for (const Agent& a : agents_) {
      AgentOutcome r;
      r.id = a.sample.id;
      r.status = a.status;
      r.egress_time = a.egress_time;
      r.fed_total = a.fed.total;
      r.health = health_effect(a.fed.total);
      r.unresolved = a.status == AgentStatus::Waiting || a.status == AgentStatus::Moving;
      if (a.egress_time) o.rset = std::max(o.rset.value_or(0.0), *a.egress_time);
      o.fatalities += a.status == AgentStatus::Dead;
      o.agents.push_back(r);
    }
    o.frames = frames_;
    return o;
  }

 private:
  struct Agent {
    AgentSample sample;
    AgentStatus status = AgentStatus::Waiting;
    AgentBody body;
    Navigator nav;
    DiskParams disks;
    int exit = -1;
    bool needs_route = false;
    StallMonitor stall;
    double next_replan = 0.0;
    double v_pref = 0.0;
    FedState fed;
    std::size_t compartment = 0;
    std::optional<double> egress_time;
  };

  LocalConditions local(const Agent& a, double t) {
    const std::string name = plan_->compartment_name(a.compartment);
    if (!history_->has(name)) return kAmbient;
    if (t > history_->end_time() && !warned_short_history_) {
      warned_short_history_ = true;
      warnings_.push_back("fire history ends at " + std::to_string(history_->end_time()) +
                          " s; later conditions hold the last record");
    }
    return conditions_at(*history_, name, t, config_.breathing_height);
  }

  // Pushed out of sight of the first waypoint there is nothing earlier to fall
  // back on; the route is planned again from where the agent stands.
  static constexpr double kReplanInterval = 1.0;  // s

  static bool lost(const Agent& a, const SightOracle& sees) {
    if (a.nav.empty() || a.nav.arrived || a.nav.walk != 0 || a.nav.look != 0) return false;
    const FsmState s = observe(a.nav, a.body.position, sees);
    return !s.in_disk && !s.can_see;
  }

  /// Leaves the previous route in place when no new one can be found.
  void plan_route(Agent& a) {
    a.needs_route = false;
    std::vector<std::size_t> open;
    for (std::size_t k = 0; k < exit_open_.size(); ++k) {
      if (exit_open_[k]) open.push_back(k);
    }
    const double min_width = 2.0 * a.sample.radius;
    NodeId from = kNoNode;
    try {
      from = graph_.attach_point(a.body.position);
      PortalRoute route = shortest_route(graph_, from, open, min_width);
      // An agent preferring an alternative route avoids the nearest exit when another one is usable.
      if (a.sample.alternative_route && open.size() > 1 && route.exit >= 0) {
        std::vector<std::size_t> others;
        for (std::size_t k : open) {
          if (static_cast<int>(k) != route.exit) others.push_back(k);
        }
        try {
          route = shortest_route(graph_, from, others, min_width);
        } catch (const RouteError&) {
        }
      }
      std::vector<Vec2> pts = funnel(route, a.sample.radius);
      if (pts.size() > 1) pts.erase(pts.begin());
      a.nav = Navigator{};
      a.nav.disks = a.disks;
      a.nav.waypoints = std::move(pts);
      a.exit = route.exit;
    } catch (const RouteError& e) {
      if (!a.nav.empty() && a.exit >= 0 && !exit_open_[static_cast<std::size_t>(a.exit)]) {
        a.nav = Navigator{};
        a.exit = -1;
      }
      std::ostringstream os;
      os << "agent " << a.sample.id << " at (" << a.body.position.x << ", " << a.body.position.y
         << "), t = " << time() << " s: " << e.what();
      warnings_.push_back(os.str());
    }
    if (from != kNoNode) graph_.detach(from);
  }

  /// Beyond every compartment and its walls: the agent has left the building.
  bool outside(Vec2 p) const {
    const double skin = 0.5 * wall_thickness_ + 1e-9;
    for (std::size_t c = 0; c < plan_->compartment_count(); ++c) {
      if (plan_->compartment(c).footprint().contains_closed(p, skin)) return false;
    }
    return true;
  }

  void state_phase(double t) {
    while (next_closure_ < config_.exit_closures.size() && config_.exit_closures[next_closure_].time <= t) {
      close_exit(config_.exit_closures[next_closure_++].exit);
    }
    for (Agent& a : agents_) {
      if (a.status == AgentStatus::Waiting && t >= alarm_time_ + a.sample.pre_evac) {
        a.status = AgentStatus::Moving;
        a.needs_route = true;
        a.stall.reset(a.sample.id, a.body.position, t);
      }
    }
  }

  void goals_phase(double t) {
    const SightOracle sees = [this](Vec2 p, Vec2 q) { return field_.line_of_sight(p, q); };
    for (Agent& a : agents_) {
      if (a.status != AgentStatus::Moving) continue;
      if (a.needs_route) plan_route(a);
      fsm_step(a.nav, a.body.position, sees);
      if (outside(a.body.position)) a.nav.arrived = true;
      if (lost(a, sees) && t >= a.next_replan) {
        plan_route(a);
        a.next_replan = t + kReplanInterval;
        fsm_step(a.nav, a.body.position, sees);
      }
      if (a.nav.arrived) {
        a.status = AgentStatus::Escaped;
        a.egress_time = t;
        continue;
      }
      a.body.pref_velocity =
          a.stall.adjust(a.body.position, preferred_velocity(a.nav, a.body.position, a.v_pref, config_.dt), t);
    }
  }

  void velocity_and_position_phase() {
    bodies_.clear();
    owners_.clear();
    bool anyone_moving = false;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      Agent& a = agents_[i];
      if (a.status == AgentStatus::Escaped) continue;
      const bool moving = a.status == AgentStatus::Moving;
      anyone_moving = anyone_moving || moving;
      a.body.is_static = !moving;
      a.body.max_speed = moving ? a.v_pref : 0.0;
      a.body.v_pref_mag = a.body.max_speed;
      if (!moving) a.body.velocity = a.body.pref_velocity = {};
      bodies_.push_back(a.body);
      owners_.push_back(i);
    }
    if (!anyone_moving) return;
    const std::vector<Vec2> v = orca_velocities(bodies_, field_, config_.dt, config_.orca);
    for (std::size_t j = 0; j < owners_.size(); ++j) {
      Agent& a = agents_[owners_[j]];
      if (a.status != AgentStatus::Moving) continue;
      a.body.velocity = v[j];
      a.body.position += v[j] * config_.dt;
      if (const auto c = locate_compartment(*plan_, a.body.position)) a.compartment = *c;
    }
  }

  void environment_phase(double t) {
    const double span = static_cast<double>(config_.env_update_stride) * config_.dt;
    for (Agent& a : agents_) {
      if (is_terminal(a.status)) continue;
      const LocalConditions c = local(a, t);
      a.v_pref = walking_speed(a.sample.v_horizontal, c.ks, {a.sample.alpha, a.sample.beta});
      a.fed = fed_increment(a.fed, c, span);
      if (a.fed.total >= kLethalFed) {
        a.status = AgentStatus::Dead;
      } else if (a.fed.total >= kIncapacitationFed) {
        a.status = AgentStatus::Incapacitated;
      }
    }
  }

  void record_frame() {
    Frame f{time(), {}};
    for (const Agent& a : agents_) f.agents.push_back({a.sample.id, a.body.position, a.status, a.fed.total});
    frames_->push_back(std::move(f));
  }

  const FloorPlan* plan_;
  const FireHistory* history_;
  double wall_thickness_;
  EngineConfig config_;
  RouteGraph graph_;
  ObstacleField field_;
  std::uint64_t seed_;
  double alarm_time_;
  std::vector<char> exit_open_;
  std::size_t next_closure_ = 0;
  std::vector<Agent> agents_;
  std::vector<AgentBody> bodies_;
  std::vector<std::size_t> owners_;
  std::size_t steps_ = 0;
  bool finished_ = false;
  bool warned_short_history_ = false;
  std::vector<std::string> warnings_;
  std::optional<std::vector<Frame>> frames_;
};

inline SimulationOutcome run_simulation(const FloorPlan& plan, const NavMesh& nav, const FireHistory& history,
                                        const ScenarioSample& sample, const EngineConfig& config) {
  return Simulation(plan, nav, history, sample, config).run();
}

// ---------------------------------------------------------------------------
// Serialization
//
// Frame record (one JSON object per line):
//   {"t": 0.05, "agents": [{"id": 0, "x": 1.0, "y": 2.0, "status": "Moving", "fed": 0.0}, ...]}
//
// Outcome record:
//   {"seed": 7, "steps": 812, "end_time": 40.6, "rset": 39.1 | null, "fatalities": 0,
//    "agents": [{"id", "status", "egress_time" | null, "fed", "health", "unresolved"}],
//    "warnings": [...]}

inline void export_frames(const SimulationOutcome& o, std::ostream& os) {
  if (!o.frames) throw InputError("frames were not retained for this run");
  for (const Frame& f : *o.frames) {
    nlohmann::ordered_json agents = nlohmann::ordered_json::array();
    for (const FrameAgent& a : f.agents) {
      agents.push_back({{"id", a.id}, {"x", a.position.x}, {"y", a.position.y}, {"status", to_string(a.status)},
                        {"fed", a.fed_total}});
    }
    os << nlohmann::ordered_json{{"t", f.time}, {"agents", agents}}.dump() << '\n';
  }
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& x) {
  return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json outcome_json(const SimulationOutcome& o) {
  nlohmann::ordered_json agents = nlohmann::ordered_json::array();
  for (const AgentOutcome& a : o.agents) {
    agents.push_back({{"id", a.id},
                      {"status", to_string(a.status)},
                      {"egress_time", optional_json(a.egress_time)},
                      {"fed", a.fed_total},
                      {"health", to_string(a.health)},
                      {"unresolved", a.unresolved}});
  }
  return {{"seed", o.seed},
          {"steps", o.steps},
          {"end_time", o.end_time},
          {"rset", optional_json(o.rset)},
          {"fatalities", o.fatalities},
          {"agents", agents},
          {"warnings", o.warnings}};
}

inline SimulationOutcome outcome_from_json(const nlohmann::json& j) {
  SimulationOutcome o;
  try {
    o.seed = j.at("seed").get<std::uint64_t>();
    o.steps = j.at("steps").get<std::size_t>();
    o.end_time = j.at("end_time").get<double>();
    if (!j.at("rset").is_null()) o.rset = j.at("rset").get<double>();
    o.fatalities = j.at("fatalities").get<std::size_t>();
    for (const auto& a : j.at("agents")) {
      AgentOutcome r;
      r.id = a.at("id").get<std::size_t>();
      r.status = parse_agent_status(a.at("status").get<std::string>());
      if (!a.at("egress_time").is_null()) r.egress_time = a.at("egress_time").get<double>();
      r.fed_total = a.at("fed").get<double>();
      r.health = health_effect(r.fed_total);
      r.unresolved = a.at("unresolved").get<bool>();
      o.agents.push_back(r);
    }
    o.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("outcome record: ") + e.what());
  }
  return o;
}

}  // namespace aevac
