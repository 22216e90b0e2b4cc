#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aevac/engine.hpp"
#include "test_support.hpp"

namespace aevac {
namespace {

AgentSample walker(std::size_t id, Vec2 p, std::size_t compartment, double v = 1.2) {
  AgentSample a;
  a.id = id;
  a.position = p;
  a.compartment = compartment;
  a.pre_evac = 0.0;
  a.v_horizontal = v;
  return a;
}

ScenarioSample scenario(std::vector<AgentSample> agents, double alarm = 0.0, std::uint64_t seed = 1) {
  ScenarioSample s;
  s.seed = seed;
  s.alarm_time = alarm;
  s.agents = std::move(agents);
  return s;
}

ZoneRecord smoky(double t, double co, double od = 0.0) {
  ZoneRecord r;
  r.time = t;
  r.layer_height = 0.0;  // everybody breathes the upper layer
  r.upper.co = co;
  r.upper.od = od;
  r.lower = r.upper;
  return r;
}

/// Two-door corridor [0, 20] x [0, 2]: exit 0 on the west face, exit 1 on the east face.
FloorPlan two_door_corridor() {
  FloorPlan p;
  p.floor_id = "T";
  p.corridors.push_back(testing::box(0, 0, 20, 2));
  p.doors.push_back(testing::vent(0, 0.3, 0, 1.7));
  p.doors.push_back(testing::vent(20, 0.3, 20, 1.7));
  return p;
}

TEST(Engine, CorridorWalkTakesDistanceOverSpeed) {
  const FloorPlan p = testing::straight_corridor(41.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  const SimulationOutcome o = run_simulation(p, nav, FireHistory{}, scenario({walker(0, {1.0, 1.0}, 0)}), {});
  ASSERT_EQ(o.agents.size(), 1u);
  EXPECT_EQ(o.agents[0].status, AgentStatus::Escaped);
  ASSERT_TRUE(o.agents[0].egress_time);
  EXPECT_NEAR(*o.agents[0].egress_time, 40.0 / 1.2, 0.5);
  EXPECT_EQ(o.rset, o.agents[0].egress_time);
  EXPECT_EQ(o.fatalities, 0u);
  EXPECT_FALSE(o.agents[0].unresolved);
  EXPECT_TRUE(o.warnings.empty());
}

TEST(Engine, PreEvacuationDelayShiftsEgress) {
  const FloorPlan p = testing::straight_corridor(21.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  const auto base = run_simulation(p, nav, FireHistory{}, scenario({walker(0, {1.0, 1.0}, 0)}), {});
  AgentSample late = walker(0, {1.0, 1.0}, 0);
  late.pre_evac = 7.0;
  const auto delayed = run_simulation(p, nav, FireHistory{}, scenario({late}, 3.0), {});
  EXPECT_NEAR(*delayed.agents[0].egress_time - *base.agents[0].egress_time, 10.0, 0.05 + 1e-9);
}

TEST(Engine, ZeroAgentsTerminateImmediately) {
  const FloorPlan p = testing::straight_corridor(10.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  EngineConfig cfg;
  cfg.keep_frames = true;
  const SimulationOutcome o = run_simulation(p, nav, FireHistory{}, scenario({}), cfg);
  EXPECT_EQ(o.steps, 0u);
  EXPECT_EQ(o.fatalities, 0u);
  EXPECT_FALSE(o.rset);
  ASSERT_TRUE(o.frames);
  EXPECT_TRUE(o.frames->empty());
}

/// F(t) for CO rising at k ppm/s from zero, every other species ambient.
double ramp_fed(double k, double t) {
  const double hv = std::exp(2.0004) / 7.1;
  const double co = 2.764e-5 * std::pow(k, 1.036) * std::pow(t, 2.036) / 2.036 / 60.0;
  const double hcn = (1.0 / 220.0 - 0.0045) / 60.0 * t;
  const double o2 = t / (60.0 * std::exp(8.13));
  return (co + hcn) * hv + o2;
}

double crossing(double k, double level) {
  double lo = 0.0, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ramp_fed(k, mid) < level ? lo : hi) = mid;
  }
  return lo;
}

TEST(Engine, SealedRoomIncapacitationAndDeathFollowTheDoseOracle) {
  FloorPlan p;
  p.floor_id = "S";
  p.rooms.push_back(testing::box(0, 0, 4, 4));
  const NavMesh nav = build_navmesh(p, 0.2);
  const double k = 50.0;
  FireHistory h;
  h.add("ROOM0", smoky(0.0, 0.0));
  h.add("ROOM0", smoky(2000.0, 2000.0 * k));

  EngineConfig cfg;
  Simulation sim(p, nav, h, scenario({walker(0, {2.0, 2.0}, 0)}), cfg);
  std::optional<double> t_incap, t_dead;
  double fed_at_incap = 0.0;
  while (!sim.done()) {
    sim.step();
    if (!t_incap && sim.status(0) == AgentStatus::Incapacitated) {
      t_incap = sim.time();
      fed_at_incap = sim.fed_total(0);
    }
    if (!t_dead && sim.status(0) == AgentStatus::Dead) t_dead = sim.time();
  }
  const double stride = cfg.env_update_stride * cfg.dt;
  ASSERT_TRUE(t_incap);
  ASSERT_TRUE(t_dead);
  EXPECT_NEAR(*t_incap, crossing(k, 0.3), stride);
  EXPECT_NEAR(*t_dead, crossing(k, 1.0), stride);
  EXPECT_GE(fed_at_incap, 0.3);
  EXPECT_LE(fed_at_incap, 0.3 + ramp_fed(k, *t_incap) - ramp_fed(k, *t_incap - stride) + 1e-3);
  const SimulationOutcome o = sim.outcome();
  EXPECT_EQ(o.agents[0].status, AgentStatus::Dead);
  EXPECT_EQ(o.agents[0].health, HealthEffect::Lethal);
  EXPECT_EQ(o.fatalities, 1u);
  EXPECT_FALSE(o.rset);
  EXPECT_NEAR(o.end_time, *t_dead, 1e-9);
  ASSERT_FALSE(o.warnings.empty());
  EXPECT_NE(o.warnings[0].find("no exit reachable"), std::string::npos);
}

TEST(Engine, SpeedFollowsSmokeAtEveryUpdate) {
  const FloorPlan p = testing::straight_corridor(80.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  FireHistory h;
  h.add("COR0", smoky(0.0, 0.0, 0.0));
  h.add("COR0", smoky(60.0, 0.0, 3.0));
  AgentSample a = walker(0, {1.0, 1.0}, 0, 1.3);
  a.alpha = 0.7;
  a.beta = -0.06;
  EngineConfig cfg;
  Simulation sim(p, nav, h, scenario({a}), cfg);
  std::size_t checks = 0;
  while (!sim.done()) {
    const Vec2 before = sim.position(0);
    const double limit = sim.speed_limit(0);
    sim.step();
    if (sim.status(0) == AgentStatus::Moving) {
      ASSERT_LE(distance(before, sim.position(0)), limit * cfg.dt + 1e-9);
    }
    if (sim.steps() % cfg.env_update_stride == 0 && sim.status(0) == AgentStatus::Moving) {
      const double od = 3.0 * std::min(sim.time(), 60.0) / 60.0;
      const double expected = std::max(0.13, 1.3 * (1.0 - 0.06 / 0.7 * od * std::log(10.0)));
      ASSERT_NEAR(sim.speed_limit(0), expected, 1e-12) << sim.time();
      ++checks;
    }
  }
  EXPECT_GT(checks, 30u);
  EXPECT_EQ(sim.status(0), AgentStatus::Escaped);
}

TEST(Engine, FramesOnePerStepAndReplayable) {
  const FloorPlan p = testing::straight_corridor(10.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  EngineConfig cfg;
  cfg.keep_frames = true;
  cfg.max_sim_time = 2 * cfg.dt;
  const auto two = run_simulation(p, nav, FireHistory{}, scenario({walker(0, {1, 1}, 0)}), cfg);
  ASSERT_EQ(two.steps, 2u);
  std::ostringstream os;
  export_frames(two, os);
  std::istringstream in(os.str());
  std::string line;
  std::vector<double> times;
  while (std::getline(in, line)) times.push_back(nlohmann::json::parse(line).at("t").get<double>());
  ASSERT_EQ(times.size(), 2u);
  EXPECT_LT(times[0], times[1]);

  cfg.max_sim_time = 1800;
  const auto full = run_simulation(p, nav, FireHistory{}, scenario({walker(0, {1, 1}, 0)}), cfg);
  EXPECT_EQ(full.frames->size(), full.steps);
  cfg.keep_frames = false;
  EXPECT_THROW(export_frames(run_simulation(p, nav, FireHistory{}, scenario({}), cfg), os), InputError);
}

TEST(Engine, SameInputsSameOutcomeAndFrames) {
  const FloorPlan p = parse_floor_plan(testing::read_file(testing::data_path("plans/small_office.json")));
  const NavMesh nav = build_navmesh(p, 0.2);
  SamplerConfig sc;
  sc.fire_origin = "ROOM0";
  EngineConfig cfg;
  cfg.keep_frames = true;
  for (std::uint64_t seed : {3ull, 4ull}) {
    const ScenarioSample s = sample_scenario(seed, p, sc);
    const auto a = run_simulation(p, nav, FireHistory{}, s, cfg);
    const auto b = run_simulation(p, nav, FireHistory{}, s, cfg);
    EXPECT_EQ(a, b);
    std::ostringstream fa, fb;
    export_frames(a, fa);
    export_frames(b, fb);
    EXPECT_EQ(fa.str(), fb.str());
    EXPECT_EQ(outcome_json(a).dump(), outcome_json(b).dump());
  }
}

TEST(Engine, StatusNeverRegressesAndDoseCrossesOnce) {
  const FloorPlan p = parse_floor_plan(testing::read_file(testing::data_path("plans/office_floor.json")));
  const NavMesh nav = build_navmesh(p, 0.2);
  FireHistory h;
  for (std::size_t c = 0; c < p.compartment_count(); ++c) {
    h.add(p.compartment_name(c), smoky(0.0, 0.0, 0.0));
    h.add(p.compartment_name(c), smoky(120.0, 30000.0, 2.0));
  }
  SamplerConfig sc;
  sc.fire_origin = "ROOM0";
  EngineConfig cfg;
  const LocalConditions worst{extinction(2.0), 20.0, 30000.0, 0.0, 0.0, 0.0, 20.9};
  const double max_increment = fed_increment({}, worst, cfg.env_update_stride * cfg.dt).total;
  std::size_t incapacitated = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Simulation sim(p, nav, h, sample_scenario(seed, p, sc), cfg);
    std::vector<AgentStatus> last(sim.agent_count(), AgentStatus::Waiting);
    while (!sim.done()) {
      sim.step();
      for (std::size_t i = 0; i < sim.agent_count(); ++i) {
        ASSERT_GE(static_cast<int>(sim.status(i)), static_cast<int>(last[i]));
        if (sim.status(i) == AgentStatus::Incapacitated && last[i] != AgentStatus::Incapacitated) {
          ++incapacitated;
          EXPECT_GE(sim.fed_total(i), 0.3);
          EXPECT_LE(sim.fed_total(i), 0.3 + max_increment);
        }
        if (last[i] == AgentStatus::Escaped) {
          ASSERT_EQ(sim.status(i), AgentStatus::Escaped);
        }
        last[i] = sim.status(i);
      }
    }
    const auto o = sim.outcome();
    std::size_t dead = 0;
    for (const auto& a : o.agents) dead += a.status == AgentStatus::Dead;
    EXPECT_EQ(o.fatalities, dead);
  }
  EXPECT_GT(incapacitated, 0u);
}

TEST(Engine, EveryOccupantClearsTheOfficeFloor) {
  const FloorPlan p = parse_floor_plan(testing::read_file(testing::data_path("plans/office_floor.json")));
  const NavMesh nav = build_navmesh(p, 0.2);
  SamplerConfig sc;
  sc.fire_origin = "ROOM0";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScenarioSample s = sample_scenario(seed, p, sc);
    const auto o = run_simulation(p, nav, FireHistory{}, s, EngineConfig{});
    ASSERT_GT(o.agents.size(), 20u);
    ASSERT_TRUE(o.rset.has_value()) << "seed " << seed;
    EXPECT_LT(*o.rset, 600.0);
    EXPECT_TRUE(o.warnings.empty()) << o.warnings.front();
    for (const auto& a : o.agents) {
      ASSERT_EQ(a.status, AgentStatus::Escaped) << "seed " << seed << " agent " << a.id;
      EXPECT_GE(*a.egress_time, s.alarm_time + s.agents[a.id].pre_evac);
    }
  }
}

TEST(Engine, AgentPushedThroughAnExitCountsAsEscaped) {
  const FloorPlan p = two_door_corridor();
  const NavMesh nav = build_navmesh(p, 0.2);
  // Already past the west doorway, outside every footprint.
  Simulation sim(p, nav, FireHistory{}, scenario({walker(0, {-0.3, 1.0}, 0)}), EngineConfig{});
  while (!sim.done()) sim.step();
  EXPECT_EQ(sim.status(0), AgentStatus::Escaped);
  EXPECT_LE(sim.outcome().end_time, 0.2);
}

TEST(Engine, ClosingAnExitReroutesFromTheNextStep) {
  const FloorPlan p = two_door_corridor();
  const NavMesh nav = build_navmesh(p, 0.2);
  ASSERT_EQ(nav.exits.size(), 2u);
  Simulation sim(p, nav, FireHistory{}, scenario({walker(0, {6.0, 1.0}, 0)}), {});
  sim.step();
  ASSERT_EQ(sim.route_exit(0), 0);
  EXPECT_LT(sim.route(0).back().x, 1.0);
  for (int i = 0; i < 10; ++i) sim.step();
  sim.close_exit(0);
  sim.step();
  EXPECT_EQ(sim.route_exit(0), 1);
  EXPECT_GT(sim.route(0).back().x, 19.0);
  while (!sim.done()) sim.step();
  EXPECT_EQ(sim.status(0), AgentStatus::Escaped);
  EXPECT_GT(sim.position(0).x, 19.0);
}

TEST(Engine, ScheduledClosureAndAlternativeRoutes) {
  const FloorPlan p = two_door_corridor();
  const NavMesh nav = build_navmesh(p, 0.2);
  EngineConfig cfg;
  cfg.exit_closures.push_back({2.0, 0});
  Simulation sim(p, nav, FireHistory{}, scenario({walker(0, {6.0, 1.0}, 0)}), cfg);
  while (sim.time() < 2.0 - 1e-9) sim.step();
  EXPECT_EQ(sim.route_exit(0), 0);
  sim.step();
  EXPECT_EQ(sim.route_exit(0), 1);

  AgentSample alt = walker(0, {6.0, 1.0}, 0);
  alt.alternative_route = true;
  Simulation sim2(p, nav, FireHistory{}, scenario({alt}), {});
  sim2.step();
  EXPECT_EQ(sim2.route_exit(0), 1);

  cfg.exit_closures = {{1.0, 5}};
  EXPECT_THROW(Simulation(p, nav, FireHistory{}, scenario({}), cfg), ConfigError);
}

TEST(Engine, HorizonLeavesUnresolvedAgentsAndShortHistoryWarns) {
  const FloorPlan p = testing::straight_corridor(30.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  FireHistory h;
  h.add("COR0", smoky(0.0, 0.0));
  h.add("COR0", smoky(2.0, 0.0));
  EngineConfig cfg;
  cfg.max_sim_time = 5.0;
  const auto o = run_simulation(p, nav, h, scenario({walker(0, {1, 1}, 0), walker(1, {2, 1}, 0)}, 100.0), cfg);
  EXPECT_EQ(o.steps, 100u);
  for (const auto& a : o.agents) {
    EXPECT_EQ(a.status, AgentStatus::Waiting);
    EXPECT_TRUE(a.unresolved);
  }
  ASSERT_EQ(o.warnings.size(), 1u);
  EXPECT_NE(o.warnings[0].find("fire history ends"), std::string::npos);
}

TEST(Engine, ConfigValidation) {
  const FloorPlan p = testing::straight_corridor(10.0, 2.0);
  const NavMesh nav = build_navmesh(p, 0.2);
  EngineConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(run_simulation(p, nav, FireHistory{}, scenario({}), cfg), ConfigError);
  cfg = {};
  cfg.env_update_stride = 0;
  EXPECT_THROW(run_simulation(p, nav, FireHistory{}, scenario({}), cfg), ConfigError);
  EXPECT_THROW(run_simulation(p, nav, FireHistory{}, scenario({walker(0, {1, 1}, 3)}), {}), InputError);
}

TEST(Engine, OutcomeRecordRoundTrips) {
  const FloorPlan p = two_door_corridor();
  const NavMesh nav = build_navmesh(p, 0.2);
  const auto o = run_simulation(p, nav, FireHistory{}, scenario({walker(0, {6, 1}, 0), walker(1, {14, 1}, 0)}), {});
  const auto back = outcome_from_json(nlohmann::json::parse(outcome_json(o).dump()));
  EXPECT_EQ(back, o);
}

}  // namespace
}  // namespace aevac
