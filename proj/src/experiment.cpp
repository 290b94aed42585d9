#include "stochvsl/experiment.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>

namespace stochvsl {

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t counter) {
  return static_cast<double>(splitmix64(seed, counter) >> 11) * 0x1.0p-53;
}

std::vector<double> sample_demand_stream(const DemandDistribution& dist, int horizons, std::uint64_t seed) {
  dist.validate();
  if (horizons < 0) throw InvalidParameter("negative number of horizons");
  std::vector<double> out;
  out.reserve(horizons);
  for (int h = 0; h < horizons; ++h) {
    const double u = uniform01(seed, static_cast<std::uint64_t>(h));
    double acc = 0.0;
    int pick = -1;
    for (int j = 0; j < dist.size(); ++j) {
      if (dist.probabilities[j] <= 0.0) continue;
      acc += dist.probabilities[j];
      pick = j;
      if (u < acc) break;
    }
    out.push_back(dist.levels[pick]);
  }
  return out;
}

RunMetrics compute_metrics(const Trajectory& traj, const ObjectiveWeights& w) {
  RunMetrics m;
  m.controller = traj.controller;
  m.seed = traj.seed;
  for (const auto& hr : traj.horizons) {
    std::vector<const StepRecord*> steps;
    for (const auto& s : traj.steps)
      if (s.horizon == hr.index) steps.push_back(&s);
    if (steps.size() != hr.demand_column.size()) {
      throw InvalidParameter(fmt::format("horizon {} has {} steps but a demand column of {}", hr.index,
                                         steps.size(), hr.demand_column.size()));
    }
    double cum = 0.0, blocked = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      cum += hr.demand_column[t] - steps[t]->inflow;
      blocked += cum;
      if (t > 0) {
        const double jump = steps[t]->inflow - steps[t - 1]->inflow;
        m.jumps.push_back(jump);
        m.fluctuation += std::abs(jump);
      }
    }
    m.block += (1.0 + hr.initial_queue) * std::max(0.0, blocked);
  }
  m.block *= w.w3;
  m.fluctuation *= w.w4;
  m.combined = m.block + m.fluctuation;
  for (const auto& s : traj.steps) {
    m.throughput += s.exit_outflow * traj.T;
    m.queue_series.push_back(s.queue * traj.T);
  }
  m.conservation = conservation_error(traj);
  return m;
}

std::optional<double> ComparisonReport::reduction(ControllerKind baseline) const {
  const auto& b = of(baseline);
  const auto& t = of(ControllerKind::two_stage);
  if (b.failures > 0 || t.failures > 0 || b.combined <= 0.0) return std::nullopt;
  return 100.0 * (b.combined - t.combined) / b.combined;
}

const ControllerSummary& ComparisonReport::of(ControllerKind k) const {
  for (const auto& s : summary)
    if (s.controller == k) return s;
  throw InvalidParameter(fmt::format("no summary for controller {}", to_string(k)));
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < cfg.seeds; ++i) out.push_back(cfg.first_seed + static_cast<std::uint64_t>(i));
  return out;
}

namespace {

struct Job {
  std::size_t slot;
  ControllerKind kind;
  std::uint64_t seed;
  const std::vector<double>* stream;
};

// Runs the jobs on a small thread pool; results land in their own slot, so
// the output order does not depend on scheduling.
void run_jobs(const ExperimentConfig& cfg, const Corridor& corridor, const std::vector<Job>& jobs,
              const RunOptions& options, std::vector<RunMetrics>& runs, std::vector<Trajectory>* trajectories) {
  const auto settings = settings_from(cfg);
  std::atomic<std::size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto& job = jobs[i];
      const auto start = std::chrono::steady_clock::now();
      RunMetrics m;
      try {
        auto traj = run_closed_loop(corridor, *job.stream, job.kind, settings, job.seed);
        m = compute_metrics(traj, cfg.weights);
        if (trajectories) (*trajectories)[job.slot] = std::move(traj);
      } catch (const std::exception& ex) {
        m = RunMetrics{};
        m.controller = job.kind;
        m.seed = job.seed;
        m.error = ex.what();
      }
      m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      runs[job.slot] = std::move(m);
      if (options.progress) {
        std::lock_guard<std::mutex> lock(report);
        options.progress(runs[job.slot]);
      }
    }
  };
  int n = options.jobs > 0 ? options.jobs : static_cast<int>(std::thread::hardware_concurrency());
  n = std::clamp(n, 1, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  if (n == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::vector<ControllerSummary> summarize(const std::vector<RunMetrics>& runs) {
  std::vector<ControllerSummary> out;
  for (auto k : kAllControllers) {
    ControllerSummary s;
    s.controller = k;
    for (const auto& r : runs) {
      if (r.controller != k) continue;
      if (!r.ok()) {
        ++s.failures;
        continue;
      }
      ++s.runs;
      s.block += r.block;
      s.fluctuation += r.fluctuation;
      s.combined += r.combined;
      s.throughput += r.throughput;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

ComparisonReport run_comparison(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const RunOptions& options) {
  cfg.validate();
  const auto corridor = build_corridor(cfg);
  ComparisonReport rep;
  rep.seeds = seeds;
  std::vector<std::vector<double>> streams;
  for (auto seed : seeds) streams.push_back(sample_demand_stream(cfg.demand, cfg.horizon.horizons, seed));
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (auto k : kAllControllers) jobs.push_back({jobs.size(), k, seeds[i], &streams[i]});
  rep.runs.resize(jobs.size());
  if (options.keep_trajectories) rep.trajectories.resize(jobs.size());
  run_jobs(cfg, corridor, jobs, options, rep.runs, options.keep_trajectories ? &rep.trajectories : nullptr);
  rep.summary = summarize(rep.runs);
  return rep;
}

std::vector<SweepRow> run_sd_sweep(const ExperimentConfig& cfg, const std::vector<double>& p_grid,
                                   const std::vector<std::uint64_t>& seeds, const RunOptions& options) {
  if (cfg.sweep_levels.size() != 3) throw InvalidParameter("the sweep needs three demand levels");
  for (double p : p_grid)
    if (!(p >= 0.0 && p <= 0.5)) throw InvalidParameter(fmt::format("sweep weight {} outside [0, 0.5]", p));
  cfg.validate();
  const auto corridor = build_corridor(cfg);

  std::vector<ExperimentConfig> cfgs;
  std::vector<std::vector<double>> streams;  // [p][seed]
  for (double p : p_grid) {
    auto c = cfg;
    c.demand = DemandDistribution::symmetric(p, cfg.sweep_levels[0], cfg.sweep_levels[1], cfg.sweep_levels[2]);
    for (auto seed : seeds) streams.push_back(sample_demand_stream(c.demand, c.horizon.horizons, seed));
    cfgs.push_back(std::move(c));
  }
  // one pool per grid point keeps the settings per job simple
  std::vector<SweepRow> rows;
  for (std::size_t g = 0; g < p_grid.size(); ++g) {
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i)
      for (auto k : kAllControllers) jobs.push_back({jobs.size(), k, seeds[i], &streams[g * seeds.size() + i]});
    std::vector<RunMetrics> runs(jobs.size());
    run_jobs(cfgs[g], corridor, jobs, options, runs, nullptr);
    for (const auto& s : summarize(runs)) rows.push_back({p_grid[g], cfgs[g].demand.stddev(), s});
  }
  return rows;
}

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  return out;
}

}  // namespace

void write_metrics_csv(const ComparisonReport& rep, const std::string& path) {
  auto out = open_csv(path);
  out << "seed,controller,block,fluctuation,combined,throughput,conservation_error,seconds,error\n";
  for (const auto& r : rep.runs) {
    out << fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.3g},{:.2f},\"{}\"\n", r.seed, to_string(r.controller),
                       r.block, r.fluctuation, r.combined, r.throughput, r.conservation, r.seconds, r.error);
  }
}

void write_summary_csv(const ComparisonReport& rep, const std::string& path) {
  auto out = open_csv(path);
  out << "controller,runs,failures,block,fluctuation,combined,throughput,two_stage_reduction_pct\n";
  for (const auto& s : rep.summary) {
    std::string red;
    if (s.controller != ControllerKind::two_stage) {
      if (auto r = rep.reduction(s.controller)) red = fmt::format("{:.2f}", *r);
    }
    out << fmt::format("{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", to_string(s.controller), s.runs, s.failures,
                       s.block, s.fluctuation, s.combined, s.throughput, red);
  }
}

void write_queue_csv(const ComparisonReport& rep, const std::string& path) {
  auto out = open_csv(path);
  out << "seed,controller,step,queue_vehicles\n";
  for (const auto& r : rep.runs)
    for (std::size_t k = 0; k < r.queue_series.size(); ++k)
      out << fmt::format("{},{},{},{:.9g}\n", r.seed, to_string(r.controller), k, r.queue_series[k]);
}

void write_jumps_csv(const ComparisonReport& rep, const std::string& path) {
  auto out = open_csv(path);
  out << "seed,controller,index,jump\n";
  for (const auto& r : rep.runs)
    for (std::size_t k = 0; k < r.jumps.size(); ++k)
      if (r.jumps[k] != 0.0) out << fmt::format("{},{},{},{:.9g}\n", r.seed, to_string(r.controller), k, r.jumps[k]);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "p,sd,controller,runs,failures,block,fluctuation,combined,throughput\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << fmt::format("{:g},{:.6f},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.p, r.sd, to_string(s.controller),
                       s.runs, s.failures, s.block, s.fluctuation, s.combined, s.throughput);
  }
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                    const std::string& command, const std::string& path) {
  const auto text = dump_config(cfg);
  nlohmann::json j;
  j["command"] = command;
  j["config_fnv1a"] = fmt::format("{:016x}", fnv1a(text));
  j["config"] = text;
  j["seeds"] = seeds;
  j["rng"] = "splitmix64 counter stream";
  j["version"] = STOCHVSL_VERSION;
  j["compiler"] = __VERSION__;
  j["fmt"] = FMT_VERSION;
  j["eigen"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << j.dump(2) << "\n";
}

}  // namespace stochvsl
