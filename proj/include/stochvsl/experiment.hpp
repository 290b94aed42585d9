#pragma once

// Seeded demand streams, closed-loop metrics, the four-controller comparison
// and the demand-variation sweep.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stochvsl/config.hpp"
#include "stochvsl/rh_controller.hpp"

namespace stochvsl {

/// SplitMix64 used as a counter-based generator: draw i of a stream is
/// mix(seed + (i + 1) * 0x9E3779B97F4A7C15), so draws do not depend on
/// evaluation order and are portable.
std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter);
/// Uniform in [0, 1) from the top 53 bits.
double uniform01(std::uint64_t seed, std::uint64_t counter);

/// One realized level per horizon, i.i.d. from the distribution.
std::vector<double> sample_demand_stream(const DemandDistribution& dist, int horizons, std::uint64_t seed);

struct RunMetrics {
  ControllerKind controller{ControllerKind::two_stage};
  std::uint64_t seed{0};
  double block{0.0};        // w3 term summed over horizons
  double fluctuation{0.0};  // w4 term, within horizons only
  double combined{0.0};
  double throughput{0.0};   // vehicles through the exit
  double conservation{0.0};
  std::vector<double> jumps;         // signed within-horizon inflow changes
  std::vector<double> queue_series;  // controlled-entry queue after each step, vehicles
  double seconds{0.0};
  std::string error;  // empty when the run completed

  bool ok() const { return error.empty(); }
};

RunMetrics compute_metrics(const Trajectory& traj, const ObjectiveWeights& weights);

struct RunOptions {
  int jobs{0};  // 0: hardware concurrency
  bool keep_trajectories{false};
  /// Called after each finished run (from worker threads, serialized).
  std::function<void(const RunMetrics&)> progress;
};

struct ControllerSummary {
  ControllerKind controller{ControllerKind::two_stage};
  double block{0.0};  // sums over the completed seeds
  double fluctuation{0.0};
  double combined{0.0};
  double throughput{0.0};
  int runs{0};
  int failures{0};
};

struct ComparisonReport {
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;           // seed-major, controllers in kAllControllers order
  std::vector<Trajectory> trajectories;   // same order, when kept
  std::vector<ControllerSummary> summary;  // kAllControllers order
  /// Combined-metric reduction of the two-stage model against each
  /// baseline, percent of the baseline, on seed sums.
  std::optional<double> reduction(ControllerKind baseline) const;
  const ControllerSummary& of(ControllerKind k) const;
};

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg);

ComparisonReport run_comparison(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const RunOptions& options = {});

struct SweepRow {
  double p{0.0};
  double sd{0.0};
  ControllerSummary summary;
};

/// Symmetric distributions {p, 1 - 2p, p} over cfg.sweep_levels.
std::vector<SweepRow> run_sd_sweep(const ExperimentConfig& cfg, const std::vector<double>& p_grid,
                                   const std::vector<std::uint64_t>& seeds, const RunOptions& options = {});

void write_metrics_csv(const ComparisonReport& report, const std::string& path);
void write_summary_csv(const ComparisonReport& report, const std::string& path);
void write_queue_csv(const ComparisonReport& report, const std::string& path);
void write_jumps_csv(const ComparisonReport& report, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
/// JSON manifest: config hash, seeds, library versions, command.
void write_manifest(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                    const std::string& command, const std::string& path);

}  // namespace stochvsl
