// Command-line front end: closed-loop runs, the controller comparison, the
// demand-variation sweep and model export.

#include <CLI11.hpp>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>

#include "stochvsl/experiment.hpp"

namespace fs = std::filesystem;
using namespace stochvsl;

namespace {

struct Common {
  std::string config;
  std::string preset{"case_study"};
  std::string out{"out"};
  int horizons{0};
  int jobs{0};
  double gap{-1.0};
  double time_limit{-1.0};
  long node_limit{-1};
  bool quiet{false};
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "YAML configuration file (overrides --preset)");
  app->add_option("--preset", c.preset, "built-in configuration")->capture_default_str();
  app->add_option("-o,--out", c.out, "output directory")->capture_default_str();
  app->add_option("--horizons", c.horizons, "number of project horizons (default from config)")
      ->check(CLI::PositiveNumber);
  app->add_option("--gap", c.gap, "relative MIP gap")->check(CLI::NonNegativeNumber);
  app->add_option("--time-limit", c.time_limit, "time limit per MILP solve (s)")->check(CLI::PositiveNumber);
  app->add_option("--node-limit", c.node_limit, "node limit per MILP solve")->check(CLI::PositiveNumber);
  app->add_flag("-q,--quiet", c.quiet, "no progress output");
}

ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? preset_config(c.preset) : load_config(c.config);
  if (c.horizons > 0) cfg.horizon.horizons = c.horizons;
  if (c.gap >= 0.0) cfg.solver.relative_gap = c.gap;
  if (c.time_limit > 0.0) cfg.solver.time_limit = c.time_limit;
  if (c.node_limit > 0) cfg.solver.node_limit = c.node_limit;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::path p(c.out);
  fs::create_directories(p);
  return p;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

void print_summary(const ComparisonReport& rep) {
  fmt::print("{:<10} {:>5} {:>12} {:>12} {:>12} {:>14} {:>10}\n", "controller", "runs", "block", "fluctuation",
             "combined", "throughput", "reduction");
  for (const auto& s : rep.summary) {
    std::string red = "-";
    if (s.controller != ControllerKind::two_stage)
      if (auto r = rep.reduction(s.controller)) red = fmt::format("{:.1f}%", *r);
    fmt::print("{:<10} {:>5} {:>12.4f} {:>12.4f} {:>12.4f} {:>14.1f} {:>10}\n", to_string(s.controller), s.runs,
               s.block, s.fluctuation, s.combined, s.throughput, red);
  }
  for (const auto& r : rep.runs)
    if (!r.ok()) fmt::print(stderr, "seed {} {}: {}\n", r.seed, to_string(r.controller), r.error);
}

RunOptions progress_options(const Common& c, bool keep) {
  RunOptions o;
  o.jobs = c.jobs;
  o.keep_trajectories = keep;
  if (!c.quiet) {
    o.progress = [](const RunMetrics& m) {
      if (m.ok()) {
        fmt::print(stderr, "seed {:>3} {:<9} combined {:.4f} throughput {:.1f} ({:.1f}s)\n", m.seed,
                   to_string(m.controller), m.combined, m.throughput, m.seconds);
      } else {
        fmt::print(stderr, "seed {:>3} {:<9} failed: {}\n", m.seed, to_string(m.controller), m.error);
      }
    };
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic boundary control and variable speed limits on a freeway corridor"};
  app.require_subcommand(1);

  Common sim_opts;
  std::string controller{"two-stage"};
  std::uint64_t seed{1};
  auto* sim = app.add_subcommand("simulate", "run one controller on one seeded demand stream");
  add_common(sim, sim_opts);
  sim->add_option("--controller", controller, "two-stage, d-min, d-mean or d-max")->capture_default_str();
  sim->add_option("--seed", seed, "demand stream seed")->capture_default_str();

  Common cmp_opts;
  int seeds{0};
  std::uint64_t first_seed{0};
  bool trajectories{false};
  auto* cmp = app.add_subcommand("compare", "all four controllers on identical seeded streams");
  add_common(cmp, cmp_opts);
  cmp->add_option("--seeds", seeds, "number of seeds (default from config)")->check(CLI::PositiveNumber);
  cmp->add_option("--first-seed", first_seed, "first seed (default from config)");
  cmp->add_option("-j,--jobs", cmp_opts.jobs, "parallel runs (0: all cores)");
  cmp->add_flag("--trajectories", trajectories, "also write one trajectory CSV per run");

  Common sw_opts;
  std::vector<double> grid;
  int sw_seeds{0};
  auto* sw = app.add_subcommand("sweep", "symmetric demand distributions of increasing spread");
  add_common(sw, sw_opts);
  sw->add_option("--p", grid, "probability of each extreme level (default from config)");
  sw->add_option("--seeds", sw_seeds, "number of seeds (default from config)")->check(CLI::PositiveNumber);
  sw->add_option("-j,--jobs", sw_opts.jobs, "parallel runs (0: all cores)");

  Common ex_opts;
  std::string ex_controller{"two-stage"};
  std::uint64_t ex_seed{1};
  int ex_horizon{0};
  std::string format{"lp"};
  auto* ex = app.add_subcommand("export-milp", "write the model a controller solves at a horizon start");
  add_common(ex, ex_opts);
  ex->add_option("--controller", ex_controller, "two-stage, d-min, d-mean or d-max")->capture_default_str();
  ex->add_option("--seed", ex_seed, "demand stream seed")->capture_default_str();
  ex->add_option("--horizon", ex_horizon, "horizon index; earlier horizons are simulated first")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  ex->add_option("--format", format, "lp or mps")->check(CLI::IsMember({"lp", "mps"}))->capture_default_str();

  Common cfg_opts;
  auto* cfgcmd = app.add_subcommand("config", "print the resolved configuration as YAML");
  cfgcmd->add_option("-c,--config", cfg_opts.config, "YAML configuration file");
  cfgcmd->add_option("--preset", cfg_opts.preset, "built-in configuration")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  const auto cmdline = command_line(argc, argv);

  try {
    if (*cfgcmd) {
      std::cout << dump_config(resolve(cfg_opts));
      return 0;
    }
    if (*sim) {
      const auto cfg = resolve(sim_opts);
      const auto kind = parse_controller(controller);
      const auto corridor = build_corridor(cfg);
      const auto stream = sample_demand_stream(cfg.demand, cfg.horizon.horizons, seed);
      const auto traj = run_closed_loop(corridor, stream, kind, settings_from(cfg), seed);
      const auto m = compute_metrics(traj, cfg.weights);
      const auto dir = out_dir(sim_opts);
      const auto name = fmt::format("trajectory_{}_seed{}.csv", to_string(kind), seed);
      write_trajectory_csv(traj, (dir / name).string());
      write_manifest(cfg, {seed}, cmdline, (dir / "manifest.json").string());
      fmt::print("{} seed {}: block {:.4f} fluctuation {:.4f} combined {:.4f} throughput {:.1f} conservation {:.2e}\n",
                 to_string(kind), seed, m.block, m.fluctuation, m.combined, m.throughput, m.conservation);
      fmt::print("wrote {}\n", (dir / name).string());
      return 0;
    }
    if (*cmp) {
      auto cfg = resolve(cmp_opts);
      if (seeds > 0) cfg.seeds = seeds;
      if (first_seed > 0) cfg.first_seed = first_seed;
      const auto list = seed_list(cfg);
      const auto rep = run_comparison(cfg, list, progress_options(cmp_opts, trajectories));
      const auto dir = out_dir(cmp_opts);
      write_metrics_csv(rep, (dir / "metrics.csv").string());
      write_summary_csv(rep, (dir / "summary.csv").string());
      write_queue_csv(rep, (dir / "queue.csv").string());
      write_jumps_csv(rep, (dir / "jumps.csv").string());
      for (std::size_t i = 0; i < rep.trajectories.size(); ++i) {
        const auto& t = rep.trajectories[i];
        if (t.steps.empty()) continue;
        write_trajectory_csv(t, (dir / fmt::format("trajectory_{}_seed{}.csv", to_string(t.controller), t.seed)).string());
      }
      write_manifest(cfg, list, cmdline, (dir / "manifest.json").string());
      print_summary(rep);
      return 0;
    }
    if (*sw) {
      auto cfg = resolve(sw_opts);
      if (sw_seeds > 0) cfg.seeds = sw_seeds;
      if (grid.empty()) grid = cfg.sweep_p;
      const auto list = seed_list(cfg);
      const auto rows = run_sd_sweep(cfg, grid, list, progress_options(sw_opts, false));
      const auto dir = out_dir(sw_opts);
      write_sweep_csv(rows, (dir / "sweep.csv").string());
      write_manifest(cfg, list, cmdline, (dir / "manifest.json").string());
      fmt::print("{:>5} {:>7} {:<10} {:>12} {:>12}\n", "p", "sd", "controller", "block", "fluctuation");
      for (const auto& r : rows)
        fmt::print("{:>5.2f} {:>7.3f} {:<10} {:>12.4f} {:>12.4f}\n", r.p, r.sd, to_string(r.summary.controller),
                   r.summary.block, r.summary.fluctuation);
      return 0;
    }
    if (*ex) {
      auto cfg = resolve(ex_opts);
      const auto kind = parse_controller(ex_controller);
      const auto corridor = build_corridor(cfg);
      const auto settings = settings_from(cfg);
      HorizonState state = empty_state(corridor, cfg.horizon);
      if (ex_horizon > 0) {
        const auto stream = sample_demand_stream(cfg.demand, ex_horizon + 1, ex_seed);
        state = run_closed_loop(corridor, stream, kind, settings, ex_seed).horizons.back().start;
      }
      const auto model = plan_model(corridor, state, kind, settings);
      const auto dir = out_dir(ex_opts);
      const auto path = dir / fmt::format("{}_h{}.{}", to_string(kind), ex_horizon, format);
      export_model(model.lp, path.string(), format == "lp" ? ModelFormat::lp : ModelFormat::mps);
      fmt::print("wrote {} ({} variables, {} rows)\n", path.string(), model.lp.num_vars(), model.lp.num_rows());
      return 0;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
