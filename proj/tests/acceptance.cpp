// Acceptance checks. One line per criterion: "criterion N PASS|FAIL: ...".
// Exit status is non-zero when any selected criterion fails.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <functional>
#include <random>

#include "stochvsl/experiment.hpp"
#include "support.hpp"

using namespace stochvsl;

namespace {

struct Args {
  int seeds{0};     // 0: from the configuration
  int horizons{0};  // 0: from the configuration
  int jobs{0};
  std::string out;
};

struct Outcome {
  bool pass{false};
  std::string detail;
};

ExperimentConfig base_config(const Args& a) {
  auto cfg = case_study_config();
  if (a.seeds > 0) cfg.seeds = a.seeds;
  if (a.horizons > 0) cfg.horizon.horizons = a.horizons;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs every controller on the given seeds with a hook on each solved model.
int closed_loops(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                 const std::function<void(const HorizonModel&, const Solution&)>& hook) {
  const auto corridor = build_corridor(cfg);
  auto settings = settings_from(cfg);
  int solves = 0;
  settings.on_solve = [&](const HorizonModel& m, const Solution& s) {
    ++solves;
    hook(m, s);
  };
  for (auto seed : seeds) {
    const auto stream = sample_demand_stream(cfg.demand, cfg.horizon.horizons, seed);
    for (auto k : kAllControllers) run_closed_loop(corridor, stream, k, settings, seed);
  }
  return solves;
}

Outcome fd_consistency(const Args&) {
  const double rc = critical_density(30.0, -4.9, 0.5);
  const auto fd = TriangularFD::make(30.0, -4.9, 0.5);
  const bool rc_ok = std::abs(rc - 0.0702) <= 1e-4;
  const bool cap_ok = std::abs(fd.capacity - 2.1) <= 1e-3;
  return {rc_ok && cap_ok, fmt::format("rho_c = {:.7f} (target 0.0702 +- 1e-4: {}), capacity = {:.6f} (target 2.1 +- "
                                       "1e-3: {})",
                                       rc, rc_ok ? "ok" : "off", fd.capacity, cap_ok ? "ok" : "off")};
}

Outcome godunov_oracle_agreement(const Args&) {
  std::mt19937_64 rng(2024);
  const auto fd = testsupport::case_fd();
  const auto g = LinkGeometry::make(0, 600, 2);
  bool pass = true;
  double worst_density = 0.0, worst_ratio = 0.0;
  const int instances = 8;
  for (int i = 0; i < instances; ++i) {
    const auto vc = testsupport::random_compatible_vc(rng, fd, g, 8, 20.0);
    std::vector<double> counts;
    double mid_density = 0.0;
    for (int refine : {4, 8, 16, 32}) {
      const auto e = testsupport::compare_with_godunov(vc, fd, g, refine);
      counts.push_back(e.count);
      if (refine == 8) mid_density = e.density;
    }
    for (std::size_t j = 1; j < counts.size(); ++j) pass = pass && counts[j] < counts[j - 1];
    pass = pass && mid_density <= 0.15 * fd.rho_m;
    worst_density = std::max(worst_density, mid_density);
    worst_ratio = std::max(worst_ratio, counts.back() / counts.front());
  }
  return {pass, fmt::format("{} instances; count error decreasing under refinement; worst dx=X/8 density "
                            "error {:.4f} (limit {:.3f}); worst error ratio X/32 vs X/4 {:.3f}",
                            instances, worst_density, 0.15 * fd.rho_m, worst_ratio)};
}

Outcome compatibility_certification(const Args& a) {
  auto cfg = base_config(a);
  if (a.horizons == 0) cfg.horizon.horizons = 6;
  double worst = 0.0;
  int links = 0;
  const int solves = closed_loops(cfg, {1, 2}, [&](const HorizonModel& m, const Solution& s) {
    for (std::size_t j = 0; j < m.blocks.size(); ++j) {
      for (const auto& link : m.corridor.links) {
        const auto& v = m.blocks[j].net.links.at(link.id);
        ValueConditionSet vc;
        vc.T = m.state.T;
        vc.initial_density = m.state.density.at(link.id);
        for (int n = 0; n < v.steps(); ++n) {
          vc.inflow.push_back(std::max(0.0, s.x[v.q_in[n]]));
          vc.outflow.push_back(std::max(0.0, s.x[v.q_out[n]]));
        }
        const auto fd = link.is_vsl ? link.fd_for(chosen_speed(m, s.x, link.id, static_cast<int>(j))) : link.fd;
        worst = std::max(worst, compatibility_violation(fd, link.geometry, vc));
        ++links;
      }
    }
  });
  return {worst <= 1e-6, fmt::format("{} solved models, {} link solutions re-checked; largest violation {:.3e} "
                                     "(limit 1e-6)",
                                     solves, links, worst)};
}

bool same_steps(const Trajectory& a, const Trajectory& b) {
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto &x = a.steps[i], &y = b.steps[i];
    if (x.control != y.control || x.inflow != y.inflow || x.queue != y.queue || x.exit_outflow != y.exit_outflow ||
        x.density != y.density || x.speed_limit != y.speed_limit)
      return false;
  }
  return true;
}

Outcome degenerate_equivalence(const Args&) {
  auto cfg = case_study_config();
  cfg.horizon.horizons = 4;
  const auto corridor = build_corridor(cfg);
  const auto settings = settings_from(cfg);
  // nontrivial horizon-start states from a run with the full distribution
  const auto states = run_closed_loop(corridor, {2.0, 1.0, 2.0, 1.5}, ControllerKind::d_mean, settings).horizons;
  double worst = 0.0;
  int compared = 0;
  for (const auto& hr : states) {
    for (double level : {1.0, 1.5, 2.0}) {
      const auto two = build_deterministic_equivalent(corridor, hr.start, DemandDistribution::point(level),
                                                      cfg.weights);
      const auto base = build_deterministic_baseline(corridor, hr.start, level, cfg.weights);
      const auto s2 = branch_and_bound(two.lp, cfg.solver);
      const auto sb = branch_and_bound(base.lp, cfg.solver);
      if (!s2.has_solution() || !sb.has_solution()) return {false, "a degenerate model has no solution"};
      worst = std::max(worst, std::abs(s2.objective - sb.objective));
      ++compared;
    }
  }
  bool identical = true;
  for (const auto& dist : {DemandDistribution::point(1.5), DemandDistribution::symmetric(0.0, 1.0, 1.5, 2.0)}) {
    auto s = settings;
    s.dist = dist;
    const std::vector<double> stream(cfg.horizon.horizons, 1.5);
    const auto ref = run_closed_loop(corridor, stream, ControllerKind::two_stage, s);
    for (auto k : {ControllerKind::d_min, ControllerKind::d_mean, ControllerKind::d_max})
      identical = identical && same_steps(ref, run_closed_loop(corridor, stream, k, s));
  }
  return {worst <= 1e-6 && identical,
          fmt::format("{} horizon models: largest objective difference {:.3e} (limit 1e-6); closed-loop trajectories "
                      "{}",
                      compared, worst, identical ? "identical" : "differ")};
}

Outcome solver_correctness(const Args& a) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  const int toys = 80;
  for (int inst = 0; inst < toys; ++inst) {
    const int n = 3 + inst % 10;
    const int m = 1 + inst % 3;
    LinearProgram lp;
    for (int j = 0; j < n; ++j) lp.add_binary("b");
    std::vector<std::vector<double>> rows(m, std::vector<double>(n));
    std::vector<double> cap(m), c(n);
    std::vector<RowSense> sense(m);
    for (int i = 0; i < m; ++i) {
      LinExpr e;
      double total = 0.0;
      for (int j = 0; j < n; ++j) {
        rows[i][j] = std::round(1 + 20 * u(rng));
        total += rows[i][j];
        e.add(j, rows[i][j]);
      }
      // one covering row on some instances
      sense[i] = (i == 1 && inst % 2 == 0) ? RowSense::ge : RowSense::le;
      cap[i] = std::round(total * (sense[i] == RowSense::ge ? 0.1 + 0.2 * u(rng) : 0.3 + 0.4 * u(rng)));
      lp.add_row(e, sense[i], LinExpr(cap[i]));
    }
    LinExpr obj;
    for (int j = 0; j < n; ++j) {
      c[j] = std::round(1 + 30 * u(rng)) * (u(rng) < 0.2 ? -1 : 1);
      obj.add(j, c[j]);
    }
    const bool maximize = inst % 3 != 0;
    lp.set_objective(maximize ? obj : -1.0 * obj, maximize);

    double best = -std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << n); ++mask) {
      bool ok = true;
      for (int i = 0; i < m && ok; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          if (mask >> j & 1) s += rows[i][j];
        ok = sense[i] == RowSense::le ? s <= cap[i] : s >= cap[i];
      }
      if (!ok) continue;
      double v = 0.0;
      for (int j = 0; j < n; ++j)
        if (mask >> j & 1) v += c[j];
      best = std::max(best, v);
    }
    SolveOptions opts;
    opts.relative_gap = 1e-9;
    const auto s = branch_and_bound(lp, opts);
    if (!std::isfinite(best)) {
      if (s.status != SolveStatus::infeasible) ++mismatches;
      continue;
    }
    const double got = maximize ? s.objective : -s.objective;
    if (s.status != SolveStatus::optimal || std::abs(got - best) > 1e-6) ++mismatches;
  }

  auto cfg = base_config(a);
  if (a.horizons == 0) cfg.horizon.horizons = 6;
  int bad = 0;
  double tightest = std::numeric_limits<double>::infinity();
  const int solves = closed_loops(cfg, {1}, [&](const HorizonModel& m, const Solution& s) {
    const double tol = 1e-9 * std::max(1.0, std::abs(s.objective));
    // maximization models: the relaxation and the proven bound sit above the incumbent
    if (!m.lp.maximize() || s.root_relaxation < s.objective - tol || s.bound < s.objective - tol) ++bad;
    tightest = std::min(tightest, s.root_relaxation - s.objective);
  });
  return {mismatches == 0 && bad == 0,
          fmt::format("{} binary toys (3 to 12 binaries): {} mismatches against enumeration; {} case-study solves: "
                      "{} with relaxation below the incumbent (smallest margin {:.3e})",
                      toys, mismatches, solves, bad, tightest)};
}

Outcome case_study(const Args& a) {
  const auto cfg = base_config(a);
  const auto seeds = seed_list(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunOptions opts;
  opts.jobs = a.jobs;
  opts.progress = [](const RunMetrics& m) {
    fmt::print(stderr, "  seed {:>3} {:<9} {}\n", m.seed, to_string(m.controller),
               m.ok() ? fmt::format("combined {:.4f} throughput {:.1f} ({:.1f}s)", m.combined, m.throughput,
                                    m.seconds)
                      : "failed: " + m.error);
  };
  const auto rep = run_comparison(cfg, seeds, opts);
  const double elapsed = seconds_since(t0);
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    const std::filesystem::path dir(a.out);
    write_metrics_csv(rep, (dir / "metrics.csv").string());
    write_summary_csv(rep, (dir / "summary.csv").string());
    write_jumps_csv(rep, (dir / "jumps.csv").string());
    write_queue_csv(rep, (dir / "queue.csv").string());
    write_manifest(cfg, seeds, "acceptance --criterion 6", (dir / "manifest.json").string());
  }
  int failures = 0;
  for (const auto& s : rep.summary) failures += s.failures;

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : rep.summary) {
    lo = std::min(lo, s.throughput);
    hi = std::max(hi, s.throughput);
  }
  const bool a_ok = failures == 0 && hi > 0.0 && (hi - lo) / hi <= 0.01;

  bool b_ok = failures == 0;
  std::string reductions;
  for (auto k : {ControllerKind::d_min, ControllerKind::d_mean, ControllerKind::d_max}) {
    const auto r = rep.reduction(k);
    b_ok = b_ok && r && *r >= 30.0;
    reductions += fmt::format(" {} {}", to_string(k), r ? fmt::format("{:.1f}%", *r) : "n/a");
  }

  // jumps below this size are solver noise
  constexpr double kJumpTol = 1e-6;
  int dmax_up = 0, dmin_down = 0;
  double dmax_worst = 0.0, dmin_worst = 0.0;
  for (const auto& r : rep.runs) {
    for (double j : r.jumps) {
      if (r.controller == ControllerKind::d_max && j > kJumpTol) {
        ++dmax_up;
        dmax_worst = std::max(dmax_worst, j);
      }
      if (r.controller == ControllerKind::d_min && j < -kJumpTol) {
        ++dmin_down;
        dmin_worst = std::min(dmin_worst, j);
      }
    }
  }
  const bool c_ok = failures == 0 && dmax_up == 0 && dmin_down == 0;
  const bool time_ok = elapsed <= 7200.0;

  for (const auto& s : rep.summary)
    fmt::print("  {:<9} block {:>10.4f} fluctuation {:>10.4f} combined {:>10.4f} throughput {:>10.1f}\n",
               to_string(s.controller), s.block, s.fluctuation, s.combined, s.throughput);
  return {a_ok && b_ok && c_ok && time_ok,
          fmt::format("{} seeds x {} horizons, {} failed runs, {:.0f}s (budget 7200s); (a) throughput spread {:.3f}% "
                      "[{}]; (b) two-stage reduction{} [{}]; (c) D-Max upward jumps {} (largest {:.4f}), D-Min "
                      "downward jumps {} (largest {:.4f}) [{}]",
                      seeds.size(), cfg.horizon.horizons, failures, elapsed, hi > 0 ? 100.0 * (hi - lo) / hi : 0.0,
                      a_ok ? "ok" : "fail", reductions, b_ok ? "ok" : "fail", dmax_up, dmax_worst, dmin_down,
                      dmin_worst, c_ok ? "ok" : "fail")};
}

Outcome sweep_endpoints(const Args& a) {
  auto cfg = base_config(a);
  if (a.seeds == 0) cfg.seeds = 2;
  const auto rows = run_sd_sweep(cfg, {0.0}, seed_list(cfg), {a.jobs, false, {}});
  bool same = rows.size() == 4;
  for (const auto& r : rows) {
    same = same && r.summary.failures == 0 && r.summary.block == rows[0].summary.block &&
           r.summary.fluctuation == rows[0].summary.fluctuation && r.summary.throughput == rows[0].summary.throughput;
  }
  double worst = 0.0;
  for (double p : cfg.sweep_p) {
    const auto d = DemandDistribution::symmetric(p, cfg.sweep_levels[0], cfg.sweep_levels[1], cfg.sweep_levels[2]);
    worst = std::max(worst, std::abs(d.stddev() - std::sqrt(0.5 * p)));
  }
  const double sd40 = DemandDistribution::symmetric(0.4, 1.0, 1.5, 2.0).stddev();
  const double sd35 = DemandDistribution::symmetric(0.35, 1.0, 1.5, 2.0).stddev();
  const bool quoted = std::abs(sd40 - 0.447) <= 1e-3 && std::abs(sd35 - 0.418) <= 1e-3;
  return {same && worst <= 1e-3 && quoted,
          fmt::format("p = 0 over {} seeds x {} horizons: four controllers {} (combined {:.4f}); grid of {} values: "
                      "largest |sd - sqrt(0.5p)| {:.2e}; sd(0.4) = {:.4f}, sd(0.35) = {:.4f}",
                      cfg.seeds, cfg.horizon.horizons, same ? "identical" : "differ",
                      rows.empty() ? 0.0 : rows[0].summary.combined, cfg.sweep_p.size(), worst, sd40, sd35)};
}

Outcome conservation_suite(const Args& a) {
  auto cfg = base_config(a);
  if (a.seeds == 0) cfg.seeds = 3;
  if (a.horizons == 0) cfg.horizon.horizons = 12;
  const auto corridor = build_corridor(cfg);
  int runs = 0, violations = 0, failures = 0;
  double worst = 0.0;
  auto check = [&](const ComparisonReport& rep) {
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      const auto& m = rep.runs[i];
      if (!m.ok()) {
        ++failures;
        continue;
      }
      ++runs;
      worst = std::max(worst, m.conservation);
      const auto& traj = rep.trajectories[i];
      for (const auto& s : traj.steps) {
        constexpr double tol = 1e-9;
        bool ok = s.queue >= -tol && s.ramp_queue >= -tol && s.inflow >= -tol && s.inflow <= s.control + 1e-6;
        for (const auto& l : corridor.links) {
          for (double rho : s.density.at(l.id)) ok = ok && rho >= -tol && rho <= l.fd.rho_m + tol;
          ok = ok && s.q_in.at(l.id) >= -tol && s.q_out.at(l.id) >= -tol;
          ok = ok && s.q_in.at(l.id) <= l.q_max() + 1e-6 && s.q_out.at(l.id) <= l.q_max() + 1e-6;
        }
        if (!ok) ++violations;
      }
    }
  };
  const RunOptions opts{a.jobs, true, {}};
  check(run_comparison(cfg, seed_list(cfg), opts));
  // the widest and the degenerate ends of the spread sweep
  for (double p : {0.0, 0.5}) {
    auto c = cfg;
    c.demand = DemandDistribution::symmetric(p, cfg.sweep_levels[0], cfg.sweep_levels[1], cfg.sweep_levels[2]);
    check(run_comparison(c, {cfg.first_seed}, opts));
  }
  return {failures == 0 && violations == 0 && worst <= 1e-6,
          fmt::format("{} runs ({} failed): largest relative conservation error {:.2e} (limit 1e-6); {} steps out of "
                      "bounds",
                      runs, failures, worst, violations)};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)(const Args&);
};

const Criterion kCriteria[] = {
    {1, "fundamental diagram", fd_consistency},
    {2, "closed form vs finite-volume oracle", godunov_oracle_agreement},
    {3, "compatibility of solved flows", compatibility_certification},
    {4, "point distribution equals the deterministic model", degenerate_equivalence},
    {5, "branch and bound correctness", solver_correctness},
    {6, "case study: throughput, combined metric, jump signs", case_study},
    {7, "demand-spread sweep endpoints", sweep_endpoints},
    {8, "conservation and bounds", conservation_suite},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  Args args;
  app.add_option("--criterion", only, "run one criterion (1-8); all when omitted")->check(CLI::Range(1, 8));
  app.add_option("--seeds", args.seeds, "override the number of seeds");
  app.add_option("--horizons", args.horizons, "override the number of project horizons");
  app.add_option("-j,--jobs", args.jobs, "parallel closed-loop runs (0: all cores)");
  app.add_option("-o,--out", args.out, "write the case-study outputs here");
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(args);
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    fmt::print("criterion {} {}: {} ({}) [{:.1f}s]\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail,
               seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
