#pragma once

// Demand scenarios, queue carry-over and realized entry inflows.

#include <vector>

namespace stochvsl {

struct DemandDistribution {
  std::vector<double> levels;         // veh/s
  std::vector<double> probabilities;

  static DemandDistribution point(double level) { return {{level}, {1.0}}; }
  /// Symmetric {p, 1 - 2p, p} over three levels.
  static DemandDistribution symmetric(double p, double low, double mid, double high);

  int size() const { return static_cast<int>(levels.size()); }
  double mean() const;
  /// Smallest and largest level with positive probability.
  double min() const;
  double max() const;
  double stddev() const;
  bool contains(double level, double tol = 1e-12) const;
  /// Throws InvalidParameter unless probabilities are >= 0 and sum to 1.
  void validate() const;
};

/// Column j holds the constant level of scenario j for every step.
std::vector<std::vector<double>> init_demand_matrix(const DemandDistribution& dist, int steps);

struct QueueUpdate {
  std::vector<double> demand;
  double residual{0.0};  // backlog that did not fit below the capacity
};

/// Spreads a backlog e (veh/s-equivalent) over successive steps, topping each
/// step up to the capacity Q until the backlog is exhausted.
QueueUpdate apply_queue_update(std::vector<double> column, double backlog, double capacity);

/// Steps 1-2 for every scenario column.
std::vector<QueueUpdate> scenario_demands(const DemandDistribution& dist, int steps,
                                          double backlog, double capacity);

/// Demand vector once the horizon's level is observed: the first
/// steps - rolling_steps entries equal the observed level, the rest `tail`
/// (the mean for the stochastic controller).
std::vector<double> observed_demand_vector(double observed, double tail, int steps,
                                           int rolling_steps);

struct RealizedInflow {
  std::vector<double> inflow;
  double queue{0.0};  // backlog at the end, veh/s-equivalent
};

/// Inflow = min(control, vehicles waiting) per step; waiting vehicles are the
/// backlog plus this step's demand minus what already entered.
RealizedInflow compute_realized_inflow(const std::vector<double>& control,
                                       const std::vector<double>& demand, double backlog);

}  // namespace stochvsl
