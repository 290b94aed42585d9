#pragma once

// Corridor topology and junction-level demand/supply coupling.

#include <map>
#include <string>
#include <vector>

#include "stochvsl/link_model.hpp"

namespace stochvsl {

enum class JunctionKind { serial, merge };

struct Junction {
  std::string id;
  std::vector<std::string> incoming;  // merge: mainline first, then the ramp
  std::vector<std::string> outgoing;
  JunctionKind kind{JunctionKind::serial};
};

/// Point-queue entry without internal dynamics. Controlled entries are
/// metered by the boundary control; uncontrolled ones (on-ramps) release
/// their queue as fast as the merge allows.
struct EntryLink {
  std::string id;
  bool controlled{true};
  double demand{0.0};  // veh/s, used for uncontrolled entries
};

/// Reduced receiving capacity at a corridor exit from `start` (s) onwards.
struct ExitCapacity {
  std::string link;
  double supply{kInf};
  double start{0.0};
};

struct Corridor {
  std::vector<LinkSpec> links;
  std::vector<EntryLink> entries;
  std::vector<Junction> junctions;
  std::vector<std::string> exit_links;
  std::vector<ExitCapacity> exit_capacity;

  const LinkSpec& link(const std::string& id) const;
  const EntryLink& entry(const std::string& id) const;
  bool is_link(const std::string& id) const;
  bool is_entry(const std::string& id) const;
  std::vector<std::string> vsl_links() const;
  std::vector<std::string> controlled_entries() const;
  /// Receiving capacity of exit link `id` during [t, t + T].
  double exit_supply(const std::string& id, double t) const;
  /// Junctions ordered from upstream to downstream.
  std::vector<const Junction*> ordered_junctions() const;
  /// The link fed by an entry.
  const std::string& downstream_of_entry(const std::string& entry) const;
};

struct TopologyError {
  std::string kind;  // "dangling link", "FD inconsistency", "missing VSL set", ...
  std::string message;
};

std::vector<TopologyError> validate_topology(const Corridor& corridor);
/// Throws InvalidParameter listing every error.
void require_valid(const Corridor& corridor);

/// Variables of one copy of the corridor (one scenario).
struct NetworkVariables {
  std::map<std::string, LinkVariables> links;
  std::map<std::string, std::vector<int>> entry_flow;  // per step, veh/s
  std::map<std::string, std::vector<int>> merge_choice;  // junction id -> per-step binary
};

struct NodeInputs {
  double T{1.0};
  double t0{0.0};  // absolute start of the modelled period
  std::map<std::string, double> entry_backlog;  // uncontrolled entries, veh/s-equivalent
};

/// Demand-supply coupling for one junction (all steps).
RowCounts build_node_constraints(LinearProgram& lp, const Corridor& corridor,
                                 const Junction& junction, NetworkVariables& vars,
                                 const NodeInputs& in);

/// Exit-link outflows bounded by their demand and the exit receiving capacity.
RowCounts build_exit_constraints(LinearProgram& lp, const Corridor& corridor,
                                 NetworkVariables& vars, const NodeInputs& in);

/// Numeric merge with ramp priority: the ramp takes min(available, supply),
/// the mainline takes what is left up to its demand.
struct MergeFlows {
  double main{0.0};
  double ramp{0.0};
};
MergeFlows resolve_merge(double main_demand, double ramp_available, double supply);

}  // namespace stochvsl
