#pragma once

// Project files and the batch driver behind the command-line tool.
//
// Project document (JSON, paths relative to the document's directory):
//   {
//     "schema": "aevac-project/1",
//     "floor_plan": "../plans/office_floor.json",
//     "fire_history": "../fire/office_lethal.csv",
//     "fire_origin": "ROOM0",
//     "distributions": "../distributions/office.json",   built-in office rows if absent
//     "preset": "office",
//     "distribution_overrides": {"room_density": {"kind": "uniform", "p1": 6, "p2": 6}},
//     "wall_thickness": 0.2,
//     "agent_radius": 0.25,
//     "engine": {"dt": 0.05, "env_update_stride": 20, "breathing_height": 1.8, "max_sim_time": 1800,
//                "orca": {"tau_agent": 2, "tau_obstacle": 0.4, "neighbor_dist": 5, "max_neighbors": 10},
//                "exit_closures": [{"time": 60, "exit": 1}]},
//     "batch": {"n": 100, "seed": 0, "workers": 4, "progress_every": 10},
//     "output": "out"
//   }
// Only schema, floor_plan, fire_history and fire_origin are required.
//
// Batch directory:
//   results.jsonl  one outcome record per seed, ascending; failed seeds as {"seed", "error"}
//   ledger.jsonl   one sampled scenario per seed ({"seed", "error"} if sampling failed)
//   summary.json   aggregate over the seeds that ran
//   fn.csv, rset.csv
//   frames/<seed>.jsonl  only when frames are requested

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aevac/engine.hpp"
#include "aevac/results.hpp"

namespace aevac {

inline constexpr const char* kProjectSchema = "aevac-project/1";
inline constexpr const char* kBatchSchema = "aevac-batch/1";

struct ProjectConfig {
  std::filesystem::path floor_plan;
  std::filesystem::path fire_history;
  std::filesystem::path distributions;  // empty: built-in office preset
  std::string preset = "office";
  std::string fire_origin;
  std::map<std::string, DistributionSpec> distribution_overrides;
  double wall_thickness = 0.2;
  double agent_radius = 0.25;
  EngineConfig engine;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t progress_every = 10;
  std::filesystem::path output = "out";
};

namespace detail {

inline void only_keys(const nlohmann::json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError(where + ": unknown key \"" + k + "\"");
    }
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": bad value for \"" + key + "\"");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::string slurp(const std::filesystem::path& p, const std::string& what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(what + " not found: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline EngineConfig parse_engine(const nlohmann::json& j) {
  only_keys(j, {"dt", "env_update_stride", "breathing_height", "max_sim_time", "orca", "exit_closures"}, "engine");
  EngineConfig e;
  read_opt(j, "dt", e.dt, "engine");
  read_opt(j, "env_update_stride", e.env_update_stride, "engine");
  read_opt(j, "breathing_height", e.breathing_height, "engine");
  read_opt(j, "max_sim_time", e.max_sim_time, "engine");
  if (j.contains("orca")) {
    const auto& o = j["orca"];
    only_keys(o, {"tau_agent", "tau_obstacle", "neighbor_dist", "max_neighbors"}, "engine.orca");
    read_opt(o, "tau_agent", e.orca.tau_agent, "engine.orca");
    read_opt(o, "tau_obstacle", e.orca.tau_obstacle, "engine.orca");
    read_opt(o, "neighbor_dist", e.orca.neighbor_dist, "engine.orca");
    read_opt(o, "max_neighbors", e.orca.max_neighbors, "engine.orca");
    if (!(e.orca.tau_agent > 0.0) || !(e.orca.tau_obstacle > 0.0) || !(e.orca.neighbor_dist > 0.0)) {
      throw ConfigError("engine.orca: horizons and neighbour distance must be positive");
    }
  }
  if (j.contains("exit_closures")) {
    if (!j["exit_closures"].is_array()) throw ConfigError("engine.exit_closures: expected an array");
    for (const auto& c : j["exit_closures"]) {
      only_keys(c, {"time", "exit"}, "engine.exit_closures");
      ExitClosure x{};
      if (!c.contains("time") || !c.contains("exit")) throw ConfigError("engine.exit_closures: need time and exit");
      read_opt(c, "time", x.time, "engine.exit_closures");
      read_opt(c, "exit", x.exit, "engine.exit_closures");
      e.exit_closures.push_back(x);
    }
  }
  validate(e);
  return e;
}

}  // namespace detail

/// Parses a project document; relative paths are taken against `base`.
inline ProjectConfig parse_project(const std::string& text, const std::filesystem::path& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("project: ") + e.what());
  }
  detail::only_keys(j,
                    {"schema", "floor_plan", "fire_history", "fire_origin", "distributions", "preset",
                     "distribution_overrides", "wall_thickness", "agent_radius", "engine", "batch", "output"},
                    "project");
  if (!j.contains("schema") || j["schema"] != kProjectSchema) {
    throw ConfigError(std::string("project: schema must be ") + kProjectSchema);
  }
  for (const char* k : {"floor_plan", "fire_history", "fire_origin"}) {
    if (!j.contains(k) || !j[k].is_string()) throw ConfigError(std::string("project: missing \"") + k + "\"");
  }
  ProjectConfig c;
  c.floor_plan = detail::resolve(base, j["floor_plan"].get<std::string>());
  c.fire_history = detail::resolve(base, j["fire_history"].get<std::string>());
  c.fire_origin = j["fire_origin"].get<std::string>();
  if (j.contains("distributions")) {
    std::string d;
    detail::read_opt(j, "distributions", d, "project");
    c.distributions = detail::resolve(base, d);
  }
  detail::read_opt(j, "preset", c.preset, "project");
  if (j.contains("distribution_overrides")) {
    const auto& o = j["distribution_overrides"];
    if (!o.is_object()) throw ConfigError("project: distribution_overrides must be an object");
    const auto& known = distribution_rows();
    for (const auto& [name, spec] : o.items()) {
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        throw ConfigError("project: unknown distribution row " + name);
      }
      c.distribution_overrides[name] = parse_distribution(spec, name);
    }
  }
  detail::read_opt(j, "wall_thickness", c.wall_thickness, "project");
  detail::read_opt(j, "agent_radius", c.agent_radius, "project");
  if (!(c.wall_thickness > 0.0) || !(c.agent_radius > 0.0)) {
    throw ConfigError("project: wall_thickness and agent_radius must be positive");
  }
  if (j.contains("engine")) c.engine = detail::parse_engine(j["engine"]);
  if (j.contains("batch")) {
    const auto& b = j["batch"];
    detail::only_keys(b, {"n", "seed", "workers", "progress_every"}, "batch");
    detail::read_opt(b, "n", c.n, "batch");
    detail::read_opt(b, "seed", c.seed, "batch");
    detail::read_opt(b, "workers", c.workers, "batch");
    detail::read_opt(b, "progress_every", c.progress_every, "batch");
  }
  if (j.contains("output")) {
    std::string out;
    detail::read_opt(j, "output", out, "project");
    c.output = detail::resolve(base, out);
  } else {
    c.output = base / "out";
  }
  return c;
}

inline ProjectConfig load_project(const std::filesystem::path& file) {
  return parse_project(detail::slurp(file, "project file"), file.parent_path());
}

/// Everything a simulation needs, loaded once and shared read-only by workers.
struct Project {
  ProjectConfig config;
  FloorPlan plan;
  NavMesh nav;
  FireHistory history;
  SamplerConfig sampler;
};

/// Plan, history and distributions, without the navigation mesh.
inline Project load_inputs(const ProjectConfig& c) {
  if (c.n < 1) throw ConfigError("batch size must be at least 1");
  if (c.workers < 1) throw ConfigError("worker count must be at least 1");
  Project p;
  p.config = c;
  const std::string plan_text = detail::slurp(c.floor_plan, "floor plan");
  const std::string history_text = detail::slurp(c.fire_history, "fire history");
  p.plan = parse_floor_plan(plan_text);
  validate_floor_plan(p.plan);
  if (!p.plan.find_compartment(c.fire_origin)) {
    throw ConfigError("fire origin " + c.fire_origin + " is not a compartment of " + p.plan.floor_id);
  }
  p.history = ingest_history(history_text);
  p.sampler.fire_origin = c.fire_origin;
  p.sampler.agent_radius = c.agent_radius;
  p.sampler.wall_thickness = c.wall_thickness;
  if (!c.distributions.empty()) {
    p.sampler.distributions = parse_distribution_library(detail::slurp(c.distributions, "distribution library"), c.preset);
  }
  for (const auto& [name, spec] : c.distribution_overrides) p.sampler.distributions.rows[name] = spec;
  return p;
}

inline Project open_project(const ProjectConfig& c) {
  Project p = load_inputs(c);
  p.nav = build_navmesh(p.plan, c.wall_thickness);
  for (const auto& x : c.engine.exit_closures) {
    if (x.exit >= p.nav.exits.size()) {
      throw ConfigError("exit closure names exit " + std::to_string(x.exit) + " but the plan has " +
                        std::to_string(p.nav.exits.size()));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Static checks

struct Finding {
  bool error = true;
  std::string text;
};

/// Doorless compartments, vents off every wall, compartments with no way out,
/// and fire-history coverage. Works on load_inputs() output; meshing problems
/// are reported, plan parse errors are thrown.
inline std::vector<Finding> check_project(const Project& p) {
  std::vector<Finding> out;
  const FloorPlan& plan = p.plan;
  std::vector<char> has_vent(plan.compartment_count(), 0);
  auto scan = [&](VentKind kind, std::size_t count, const char* key) {
    for (std::size_t i = 0; i < count; ++i) {
      const VentPlacement v = place_vent(plan, kind, i);
      if (v.compartments.empty()) {
        // Windows only matter to the fire model, so a stray one does not block a run.
        out.push_back({kind != VentKind::Window,
                       std::string(key) + "[" + std::to_string(i) + "]: vent is not on a compartment wall"});
      }
      if (kind != VentKind::Window) {
        for (std::size_t c : v.compartments) has_vent[c] = 1;
      }
    }
  };
  scan(VentKind::Door, plan.doors.size(), "D");
  scan(VentKind::Hole, plan.holes.size(), "HOLE");
  scan(VentKind::Window, plan.windows.size(), "W");
  for (std::size_t c = 0; c < plan.compartment_count(); ++c) {
    if (!has_vent[c]) out.push_back({true, plan.compartment_name(c) + ": no vent on compartment"});
  }
  const bool vents_placed = std::none_of(out.begin(), out.end(), [](const Finding& f) {
    return f.error && f.text.find("not on a compartment wall") != std::string::npos;
  });
  std::optional<NavMesh> nav;
  if (vents_placed) {
    try {
      nav = build_navmesh(plan, p.config.wall_thickness);
    } catch (const GeometryError& e) {
      out.push_back({true, std::string("navigation mesh: ") + e.what()});
    }
  }
  if (nav && nav->exits.empty()) out.push_back({true, plan.floor_id + ": no exit"});

  std::vector<std::size_t> exits(nav ? nav->exits.size() : 0);
  for (std::size_t k = 0; k < exits.size(); ++k) exits[k] = k;
  std::optional<RouteGraph> route_graph;
  if (nav) route_graph.emplace(nav->graph, nav->mesh);
  for (std::size_t c = 0; c < plan.compartment_count() && !exits.empty(); ++c) {
    RouteGraph& graph = *route_graph;
    const Rect r = placement_region(plan, c, p.config.wall_thickness, p.config.agent_radius);
    const Vec2 centre{0.5 * (r.lo.x + r.hi.x), 0.5 * (r.lo.y + r.hi.y)};
    try {
      const NodeId from = graph.attach_point(centre);
      try {
        shortest_route(graph, from, exits, 2.0 * p.config.agent_radius);
      } catch (const RouteError&) {
        out.push_back({true, plan.compartment_name(c) + ": no path to any exit"});
      }
      graph.detach(from);
    } catch (const RouteError&) {
      out.push_back({true, plan.compartment_name(c) + ": centre is not on the navigation mesh"});
    }
  }

  for (std::size_t c = 0; c < plan.compartment_count(); ++c) {
    if (!p.history.has(plan.compartment_name(c))) {
      out.push_back({false, plan.compartment_name(c) + ": not in the fire history, treated as clean air"});
    }
  }
  for (const std::string& name : p.history.compartments()) {
    if (!plan.find_compartment(name)) out.push_back({false, name + ": fire history compartment not in the plan"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

inline SimulationOutcome run_seed(const Project& p, std::uint64_t seed, bool keep_frames) {
  EngineConfig e = p.config.engine;
  e.keep_frames = keep_frames;
  return run_simulation(p.plan, p.nav, p.history, sample_scenario(seed, p.plan, p.sampler), e);
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<ScenarioSample> sample;
  std::optional<SimulationOutcome> outcome;
  std::string error;  // non-empty iff the seed failed
};

struct BatchResult {
  std::vector<SeedResult> runs;  // ascending seed

  std::vector<SimulationOutcome> outcomes() const {
    std::vector<SimulationOutcome> out;
    for (const auto& r : runs) {
      if (r.outcome) out.push_back(*r.outcome);
    }
    return out;
  }
};

/// Seeds base..base+n-1 over a fixed pool; each worker takes the next unclaimed
/// seed and owns it end to end. Progress goes to `progress` every `every` runs.
inline BatchResult run_batch(const Project& p, std::size_t n, std::uint64_t base, std::size_t workers,
                             bool keep_frames = false, std::ostream* progress = nullptr, std::size_t every = 10) {
  BatchResult b;
  b.runs.resize(n);
  std::atomic<std::size_t> next{0};
  std::size_t completed = 0;
  std::mutex mu;
  EngineConfig e = p.config.engine;
  e.keep_frames = keep_frames;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      SeedResult& r = b.runs[i];
      r.seed = base + i;
      try {
        r.sample = sample_scenario(r.seed, p.plan, p.sampler);
        r.outcome = run_simulation(p.plan, p.nav, p.history, *r.sample, e);
      } catch (const std::exception& ex) {
        r.outcome.reset();
        r.error = ex.what();
      }
      if (progress) {
        const std::lock_guard lock(mu);
        ++completed;
        if (completed % std::max<std::size_t>(every, 1) == 0 || completed == n) {
          *progress << "progress " << completed << '/' << n << '\n' << std::flush;
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return b;
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

/// Writes the batch directory. Returns the warnings, one per failed seed.
inline std::vector<std::string> write_batch(const Project& p, const BatchResult& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream results, ledger;
  std::vector<std::string> warnings;
  std::vector<std::uint64_t> failed;
  for (const SeedResult& r : b.runs) {
    if (r.outcome) {
      results << outcome_json(*r.outcome).dump() << '\n';
    } else {
      results << nlohmann::ordered_json{{"seed", r.seed}, {"error", r.error}}.dump() << '\n';
      warnings.push_back("seed " + std::to_string(r.seed) + " failed: " + r.error);
      failed.push_back(r.seed);
    }
    if (r.sample) {
      ledger << sample_json(*r.sample, p.plan).dump() << '\n';
    } else {
      ledger << nlohmann::ordered_json{{"seed", r.seed}, {"error", r.error}}.dump() << '\n';
    }
    if (r.outcome && r.outcome->frames) {
      std::filesystem::create_directories(dir / "frames");
      std::ofstream f(dir / "frames" / (std::to_string(r.seed) + ".jsonl"), std::ios::binary);
      export_frames(*r.outcome, f);
    }
  }
  write_text(dir / "results.jsonl", results.str());
  write_text(dir / "ledger.jsonl", ledger.str());
  const auto outcomes = b.outcomes();
  nlohmann::ordered_json doc{{"schema", kBatchSchema},
                             {"floor", p.plan.floor_id},
                             {"base_seed", b.runs.empty() ? 0 : b.runs.front().seed},
                             {"requested", b.runs.size()},
                             {"failed_seeds", failed}};
  if (!outcomes.empty()) {
    const BatchSummary s = summarize(outcomes);
    const nlohmann::ordered_json summary = summary_json(s);
    for (const auto& [k, v] : summary.items()) doc[k] = v;
    std::ostringstream fn, rset;
    write_fn_csv(fn, s);
    write_rset_csv(rset, s);
    write_text(dir / "fn.csv", fn.str());
    write_text(dir / "rset.csv", rset.str());
  }
  write_text(dir / "summary.json", doc.dump(2) + "\n");
  return warnings;
}

/// outcome.json plus frames.jsonl when frames were kept.
inline void write_run(const SimulationOutcome& o, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "outcome.json", outcome_json(o).dump(2) + "\n");
  if (o.frames) {
    std::ostringstream f;
    export_frames(o, f);
    write_text(dir / "frames.jsonl", f.str());
  }
}

/// Scenario for `seed` from a ledger file written by a batch.
inline ScenarioSample ledger_sample(const std::filesystem::path& ledger, std::uint64_t seed, const FloorPlan& plan) {
  std::istringstream in(detail::slurp(ledger, "ledger"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("ledger: ") + e.what());
    }
    if (j.value("seed", std::uint64_t{0}) != seed || !j.contains("seed")) continue;
    if (j.contains("error")) throw InputError("ledger: seed " + std::to_string(seed) + " failed to sample");
    return sample_from_json(j, plan);
  }
  throw InputError("ledger: no entry for seed " + std::to_string(seed));
}

}  // namespace aevac
