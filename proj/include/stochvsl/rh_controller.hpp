#pragma once

// Rolling-horizon closed loop: boundary control and speed limits from the
// optimization models, true traffic from the closed-form link solutions.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochvsl/config.hpp"

namespace stochvsl {

enum class ControllerKind { two_stage, d_min, d_mean, d_max };

const char* to_string(ControllerKind k);
ControllerKind parse_controller(const std::string& name);
inline constexpr ControllerKind kAllControllers[] = {ControllerKind::two_stage, ControllerKind::d_min,
                                                     ControllerKind::d_mean, ControllerKind::d_max};

/// Failure inside the loop, tagged with the horizon where it happened.
class ControllerError : public std::runtime_error {
 public:
  ControllerError(int horizon, const std::string& what);
  int horizon() const { return horizon_; }

 private:
  int horizon_;
};

/// Step-wise true-traffic simulation of a corridor. Links keep their boundary
/// flows since the last chaining point; chaining replaces them by exact
/// segment averages.
class CorridorSimulator {
 public:
  CorridorSimulator(Corridor corridor, double T, const HorizonState& initial);

  struct StepFlows {
    std::map<std::string, double> q_in, q_out;  // per link
    double entry_inflow{0.0};                   // controlled entry
    double ramp_inflow{0.0};                    // all uncontrolled entries
  };

  /// Advances one step. `control` maps controlled entries to q'; `demand`
  /// gives the arrivals of every entry during the step (veh/s).
  StepFlows step(const std::map<std::string, double>& control,
                 const std::map<std::string, double>& demand);

  /// Restarts every link from its current segment averages.
  void chain();
  /// Chains, then applies the speed limit (candidate index) on a VSL link.
  void set_speed(const std::string& link, int index);

  double time() const { return t_; }
  int speed(const std::string& link) const { return speed_.at(link); }
  const TriangularFD& fd(const std::string& link) const;
  std::vector<double> densities(const std::string& link) const;
  std::map<std::string, double> queues() const { return queue_; }
  /// Vehicles currently on road links.
  double stored() const;
  HorizonState state(int steps) const;

 private:
  struct LinkState {
    TriangularFD fd;
    ValueConditionSet vc;
  };
  Corridor c_;
  double T_;
  double t_{0.0};
  double t_chain_{0.0};
  std::map<std::string, LinkState> links_;
  std::map<std::string, double> queue_;  // entries, veh/s-equivalent
  std::map<std::string, int> speed_;
};

struct SolveRecord {
  std::string status;
  double objective{0.0};
  double bound{0.0};
  double root_relaxation{0.0};
  long nodes{0};
  double seconds{0.0};
};

struct StepRecord {
  int step{0};     // global index
  int horizon{0};
  double t{0.0};   // start of the step
  double demand{0.0};
  double control{0.0};
  double inflow{0.0};
  double queue{0.0};  // controlled entry, after the step
  double ramp_inflow{0.0};
  double ramp_queue{0.0};
  double exit_outflow{0.0};
  std::map<std::string, double> q_in, q_out;
  std::map<std::string, std::vector<double>> density;  // after the step
  std::map<std::string, double> speed_limit;           // active during the step
};

struct HorizonRecord {
  int index{0};
  double t0{0.0};
  double level{0.0};           // realized demand
  double initial_queue{0.0};   // e at t0
  std::vector<double> demand_column;  // realized level after the queue top-up
  HorizonState start;                 // corridor and queues at t0
  SolveRecord plan, replan;
};

struct Trajectory {
  ControllerKind controller{ControllerKind::two_stage};
  std::uint64_t seed{0};
  double T{20.0};
  int project_steps{8};
  std::vector<StepRecord> steps;
  std::vector<HorizonRecord> horizons;
  double initial_stored{0.0};
  double initial_queue{0.0};  // all entries
  double total_arrivals{0.0};  // vehicles
  double total_entered{0.0};
  double total_exited{0.0};
  double final_stored{0.0};
  double final_queue{0.0};
};

struct ClosedLoopSettings {
  DemandDistribution dist;
  ObjectiveWeights weights;
  HorizonConfig horizon;
  SolveOptions solver;
  /// Called with every model the loop solves and the solution it used.
  std::function<void(const HorizonModel&, const Solution&)> on_solve;
};

ClosedLoopSettings settings_from(const ExperimentConfig& cfg);

/// Empty corridor and queues.
HorizonState empty_state(const Corridor& corridor, const HorizonConfig& h);

/// The model a controller solves at the start of a project horizon.
HorizonModel plan_model(const Corridor& corridor, const HorizonState& state, ControllerKind kind,
                        const ClosedLoopSettings& settings);

/// Runs one controller over a stream of realized demand levels (one per
/// project horizon). Advances one project horizon per iteration: the first
/// N_T2 controls come from the plan at t0, the VSL and the remaining controls
/// from the re-plan at t0 + N_T2 after the level is observed.
Trajectory run_closed_loop(const Corridor& corridor, const std::vector<double>& demand_stream,
                           ControllerKind kind, const ClosedLoopSettings& settings,
                           std::uint64_t seed = 0);

/// Largest relative mismatch of the vehicle balances (road and queues).
double conservation_error(const Trajectory& traj);

void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace stochvsl
