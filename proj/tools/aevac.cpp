// aevac: validate a project, run one seeded simulation, or run a batch.
//
//   aevac validate --config FILE
//   aevac run      --config FILE --seed S [--out DIR] [--no-frames] [--ledger FILE]
//   aevac batch    --config FILE [-n N] [--seed S] [--workers W] [--out DIR] [--frames]
//
// Exit codes:
//   0  success
//   1  validation findings (validate only)
//   2  bad command line
//   3  configuration error (project file, missing referenced file, bad reference)
//   4  input error (malformed plan, fire history, ledger; plan that cannot be meshed)
//   5  simulation or output failure (every batch seed failed, no route, unwritable output)

#include <iostream>

#include <CLI11.hpp>

#include "aevac/project.hpp"

namespace {

enum Exit { kOk = 0, kFindings = 1, kUsage = 2, kConfig = 3, kInput = 4, kRuntime = 5 };

int cmd_validate(const aevac::ProjectConfig& cfg) {
  const aevac::Project p = aevac::load_inputs(cfg);
  bool errors = false;
  for (const auto& f : aevac::check_project(p)) {
    std::cout << (f.error ? "error: " : "warning: ") << f.text << '\n';
    errors = errors || f.error;
  }
  if (!errors) std::cout << "ok: " << p.plan.floor_id << ", " << p.plan.compartment_count() << " compartments\n";
  return errors ? kFindings : kOk;
}

int cmd_run(const aevac::ProjectConfig& cfg, std::uint64_t seed, bool frames, const std::string& ledger) {
  const aevac::Project p = aevac::open_project(cfg);
  aevac::EngineConfig e = cfg.engine;
  e.keep_frames = frames;
  const aevac::ScenarioSample s =
      ledger.empty() ? aevac::sample_scenario(seed, p.plan, p.sampler) : aevac::ledger_sample(ledger, seed, p.plan);
  const aevac::SimulationOutcome o = aevac::run_simulation(p.plan, p.nav, p.history, s, e);
  aevac::write_run(o, cfg.output);
  for (const auto& w : o.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "seed " << seed << ": " << o.agents.size() << " agents, " << o.fatalities << " dead, rset "
            << (o.rset ? std::to_string(*o.rset) : std::string("none")) << '\n';
  return kOk;
}

int cmd_batch(const aevac::ProjectConfig& cfg, bool frames) {
  const aevac::Project p = aevac::open_project(cfg);
  const aevac::BatchResult b = aevac::run_batch(p, cfg.n, cfg.seed, cfg.workers, frames, &std::cerr, cfg.progress_every);
  for (const auto& w : aevac::write_batch(p, b, cfg.output)) std::cerr << "warning: " << w << '\n';
  const auto outcomes = b.outcomes();
  if (outcomes.empty()) {
    std::cerr << "error: every simulation failed\n";
    return kRuntime;
  }
  const aevac::RiskEstimate r = aevac::risk_probability(outcomes);
  std::cout << "n " << outcomes.size() << ", p_hat " << r.p_hat << " +- " << r.ci_half_width << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo egress simulation"};
  app.require_subcommand(1);
  std::string config;
  std::uint64_t seed = 0;
  std::size_t n = 0, workers = 0;
  std::string out, ledger;
  bool no_frames = false, frames = false;

  auto* validate = app.add_subcommand("validate", "static checks on the plan and its references");
  validate->add_option("--config", config, "project file")->required();

  auto* run = app.add_subcommand("run", "one simulation with frames");
  run->add_option("--config", config, "project file")->required();
  run->add_option("--seed", seed, "scenario seed")->required();
  run->add_option("--out", out, "output directory");
  run->add_flag("--no-frames", no_frames, "skip the frame stream");
  run->add_option("--ledger", ledger, "take the scenario from a batch ledger instead of resampling");

  auto* batch = app.add_subcommand("batch", "seeds S..S+N-1 in parallel");
  batch->add_option("--config", config, "project file")->required();
  auto* opt_n = batch->add_option("-n", n, "simulation count")->check(CLI::PositiveNumber);
  auto* opt_seed = batch->add_option("--seed", seed, "base seed");
  auto* opt_workers = batch->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  batch->add_option("--out", out, "output directory");
  batch->add_flag("--frames", frames, "also write frames/<seed>.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    aevac::ProjectConfig cfg = aevac::load_project(config);
    if (!out.empty()) cfg.output = out;
    if (*validate) return cmd_validate(cfg);
    if (*run) return cmd_run(cfg, seed, !no_frames, ledger);
    if (opt_n->count()) cfg.n = n;
    if (opt_seed->count()) cfg.seed = seed;
    if (opt_workers->count()) cfg.workers = workers;
    return cmd_batch(cfg, frames);
  } catch (const aevac::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const aevac::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const aevac::GeometryError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
