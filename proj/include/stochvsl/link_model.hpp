#pragma once

// Linear constraints describing one link: compatibility of its value
// conditions, the speed-limit linearization, and demand/supply.

#include <span>
#include <string>
#include <vector>

#include "stochvsl/lp_model.hpp"
#include "stochvsl/lwr.hpp"

namespace stochvsl {

/// Candidate free-flow speeds with their critical densities and capacities.
struct VslSets {
  std::vector<double> vf;
  std::vector<double> rho_c;
  std::vector<double> Q;

  static VslSets make(const std::vector<double>& speeds, double w, double rho_m);
  int size() const { return static_cast<int>(vf.size()); }
  double q_max() const;
  bool consistent(double w, double rho_m, double tol = 1e-9) const;
};

struct LinkSpec {
  std::string id;
  LinkGeometry geometry;
  TriangularFD fd;  // nominal diagram; the fastest candidate on VSL links
  bool is_vsl{false};
  VslSets vsl;

  int speed_count() const { return is_vsl ? vsl.size() : 1; }
  TriangularFD fd_for(int s) const;
  double q_max() const { return is_vsl ? vsl.q_max() : fd.capacity; }
  int speed_index(double vf) const;  // -1 when not a candidate
};

struct LinkVariables {
  double T{1.0};                         // step duration
  std::vector<int> q_in, q_out;          // per step
  std::vector<int> delta;                // speed choice (VSL links)
  std::vector<std::vector<int>> k_a;     // [s][i]
  std::vector<int> k_in;                 // [i]
  std::vector<int> demand, supply;       // per step, empty until built
  std::vector<int> selection;            // binaries of exact min-selections

  int steps() const { return static_cast<int>(q_in.size()); }
};

/// Creates flow variables (and the speed-choice block on VSL links).
LinkVariables make_link_variables(LinearProgram& lp, const LinkSpec& link, int n_max, double T,
                                  const std::string& tag);

struct RowCounts {
  int emitted{0};
  int gated{0};       // rows active only under one speed choice
  int redundant{0};   // implied by variable bounds or a tighter duplicate
};

/// Compatibility conditions among the initial, upstream and downstream value
/// conditions. Initial densities are parameters.
RowCounts build_compatibility(LinearProgram& lp, const LinkSpec& link, const LinkVariables& vars,
                              std::span<const double> initial_density);

/// Speed choice: sum delta = 1, the rho_c*vf identity and the k_a / k_in
/// sandwich for q_in/vf.
RowCounts build_vsl_linearization(LinearProgram& lp, const LinkSpec& link,
                                  const LinkVariables& vars);

enum class BoundMode {
  upper,  // D_n / S_n bounded above by every component (sufficient when only q <= D is used)
  exact,  // D_n / S_n equal to the minimum component via binary selection
};

/// Defines D_n (exits possible in step n with unlimited downstream space)
/// and S_n (entries possible with unlimited upstream demand).
RowCounts build_demand_supply(LinearProgram& lp, const LinkSpec& link, LinkVariables& vars,
                              std::span<const double> initial_density, BoundMode demand_mode,
                              BoundMode supply_mode);

/// Per-segment densities at t_boundary for the next period, as exact
/// segment averages of the closed-form solution (vehicle-conserving).
std::vector<double> chain_initial_densities(const LinkGeometry& geom, const TriangularFD& fd,
                                            const ValueConditionSet& vc, double t_boundary);

/// Largest violation of the compatibility inequalities re-evaluated with
/// numeric flows (0 when every inequality holds).
double compatibility_violation(const TriangularFD& fd, const LinkGeometry& geom,
                               const ValueConditionSet& vc);

}  // namespace stochvsl
