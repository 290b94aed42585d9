#pragma once

// Two-stage boundary-flow / speed-limit model over one project horizon in
// extensive form, and its single-scenario (deterministic) special case.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stochvsl/demand.hpp"
#include "stochvsl/lp_model.hpp"
#include "stochvsl/network.hpp"

namespace stochvsl {

struct ObjectiveWeights {
  double w0{1e-4};   // first-stage control
  double w1{0.01};   // inflow into speed-controlled links
  double w2{0.02};   // inflow at controlled entries
  double w3{0.003};  // block penalty
  double w4{10.0};   // inflow fluctuation

  void validate() const;
};

struct HorizonState {
  std::map<std::string, std::vector<double>> density;  // per road link, per segment
  std::map<std::string, double> queue;                 // per entry, veh/s-equivalent
  int steps{8};
  double T{20.0};
  double t0{0.0};  // absolute time of the horizon start
};

struct Scenario {
  double probability{1.0};
  std::map<std::string, std::vector<double>> demand;  // controlled entry -> per step
};

struct ModelOptions {
  /// Last realized inflow per controlled entry; adds |q_in(1) - previous| to
  /// the fluctuation term when the model starts inside a project horizon.
  std::map<std::string, double> previous_inflow;
  /// Speed index per VSL link to hold fixed (e.g. while reproducing a run).
  std::map<std::string, int> fixed_speed;
  /// Step at which the next project horizon starts inside the window. The
  /// inflow change into that step is not penalized. 0 means none.
  int project_boundary{0};
};

struct ScenarioBlock {
  NetworkVariables net;
  std::map<std::string, std::vector<int>> recourse_delta;  // entry -> per step
  std::map<std::string, std::vector<int>> fluctuation;     // entry -> epigraph vars
};

struct HorizonModel {
  LinearProgram lp;
  Corridor corridor;
  std::map<std::string, std::vector<int>> control;  // first stage q'_in
  std::vector<Scenario> scenarios;
  std::vector<ScenarioBlock> blocks;
  HorizonState state;
  ObjectiveWeights weights;
  ModelOptions options;
};

/// Extensive form for explicit scenarios (demand already queue-adjusted).
HorizonModel build_two_stage(const Corridor& corridor, const HorizonState& state,
                             std::vector<Scenario> scenarios, const ObjectiveWeights& weights,
                             const ModelOptions& options = {});

/// Scenario columns from the distribution (constant per scenario, queue update
/// applied with the capacity of the link each entry feeds).
std::vector<Scenario> scenarios_from(const Corridor& corridor, const HorizonState& state,
                                     const DemandDistribution& dist);

HorizonModel build_deterministic_equivalent(const Corridor& corridor, const HorizonState& state,
                                            const DemandDistribution& dist,
                                            const ObjectiveWeights& weights,
                                            const ModelOptions& options = {});

HorizonModel build_deterministic_baseline(const Corridor& corridor, const HorizonState& state,
                                          double fixed_demand, const ObjectiveWeights& weights,
                                          const ModelOptions& options = {});

struct ScenarioTerms {
  double outflow{0.0};      // sum exit q_out (N - t + 1)
  double vsl_inflow{0.0};   // w1 * sum q_in on VSL links
  double entry_inflow{0.0}; // w2 * sum q_in at controlled entries
  double block{0.0};        // w3 * (1 + e) * sum (cum demand - cum inflow)
  double fluctuation{0.0};  // w4 * sum |delta q_in|
  double value() const { return outflow - vsl_inflow - entry_inflow - block - fluctuation; }
};

struct ObjectiveTerms {
  double control{0.0};  // w0 * sum q'
  std::vector<ScenarioTerms> scenarios;
  double total{0.0};
};

/// Recomputes every objective term from a solution vector.
ObjectiveTerms objective_breakdown(const HorizonModel& model, const std::vector<double>& x);

/// Speed chosen on a VSL link in a solution (index into its candidate set).
int chosen_speed(const HorizonModel& model, const std::vector<double>& x, const std::string& link,
                 int scenario = 0);

}  // namespace stochvsl
