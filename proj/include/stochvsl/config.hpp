#pragma once

// Experiment configuration: corridor description, demand, weights, horizon
// and solver settings. Serialized as YAML.

#include <cstdint>
#include <string>
#include <vector>

#include "stochvsl/demand.hpp"
#include "stochvsl/milp.hpp"
#include "stochvsl/network.hpp"
#include "stochvsl/stochastic_program.hpp"

namespace stochvsl {

struct MainlineLink {
  std::string id;
  double length{1200.0};  // m
  int segments{2};
  bool vsl{false};
};

struct OnRamp {
  std::string id{"ramp"};
  std::string joins{"L2"};  // mainline link fed by the merge
  double demand{0.05};      // veh/s
};

struct HorizonConfig {
  int project_steps{8};  // N_T1
  int rolling_steps{4};  // N_T2
  double T{20.0};        // s
  int horizons{40};

  void validate() const;
};

struct ExperimentConfig {
  // fundamental diagram (lane-aggregated)
  double vf{30.0};
  double w{-4.9};
  double rho_m{0.5};
  int lanes{4};
  std::vector<double> speed_limits{10, 15, 20, 25, 30};

  std::string entry{"in"};
  std::vector<MainlineLink> mainline;
  std::vector<OnRamp> ramps;
  ExitCapacity capacity_drop;

  DemandDistribution demand;
  ObjectiveWeights weights;
  HorizonConfig horizon;

  int seeds{10};
  std::uint64_t first_seed{1};
  std::vector<double> sweep_p{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::vector<double> sweep_levels{1.0, 1.5, 2.0};

  SolveOptions solver;

  /// Throws InvalidParameter on inconsistent settings (including topology).
  void validate() const;
};

ExperimentConfig case_study_config();

/// Mainline links in order, entry feeding the first through a serial
/// junction, ramps merging (with priority) upstream of the link they join.
Corridor build_corridor(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& yaml_text);
std::string dump_config(const ExperimentConfig& cfg);

/// Config presets by name ("case_study").
ExperimentConfig preset_config(const std::string& name);

/// 64-bit FNV-1a of a string.
std::uint64_t fnv1a(const std::string& text);

}  // namespace stochvsl
