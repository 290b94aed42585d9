#include "stochvsl/network.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <set>

namespace stochvsl {

const LinkSpec& Corridor::link(const std::string& id) const {
  for (const auto& l : links)
    if (l.id == id) return l;
  throw InvalidParameter(fmt::format("unknown link '{}'", id));
}

const EntryLink& Corridor::entry(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return e;
  throw InvalidParameter(fmt::format("unknown entry '{}'", id));
}

bool Corridor::is_link(const std::string& id) const {
  return std::any_of(links.begin(), links.end(), [&](const LinkSpec& l) { return l.id == id; });
}

bool Corridor::is_entry(const std::string& id) const {
  return std::any_of(entries.begin(), entries.end(), [&](const EntryLink& e) { return e.id == id; });
}

std::vector<std::string> Corridor::vsl_links() const {
  std::vector<std::string> out;
  for (const auto& l : links)
    if (l.is_vsl) out.push_back(l.id);
  return out;
}

std::vector<std::string> Corridor::controlled_entries() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.controlled) out.push_back(e.id);
  return out;
}

double Corridor::exit_supply(const std::string& id, double t) const {
  double s = kInf;
  for (const auto& c : exit_capacity)
    if (c.link == id && t >= c.start - 1e-9) s = std::min(s, c.supply);
  return s;
}

std::vector<const Junction*> Corridor::ordered_junctions() const {
  std::vector<const Junction*> order;
  std::set<std::string> ready;
  for (const auto& e : entries) ready.insert(e.id);
  std::vector<bool> done(junctions.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = 0; i < junctions.size(); ++i) {
      if (done[i]) continue;
      const auto& j = junctions[i];
      if (!std::all_of(j.incoming.begin(), j.incoming.end(),
                       [&](const std::string& id) { return ready.count(id) > 0; }))
        continue;
      done[i] = true;
      progress = true;
      order.push_back(&j);
      for (const auto& o : j.outgoing) ready.insert(o);
    }
  }
  if (order.size() != junctions.size()) throw InvalidParameter("junctions do not form an acyclic path");
  return order;
}

const std::string& Corridor::downstream_of_entry(const std::string& id) const {
  for (const auto& j : junctions)
    for (const auto& in : j.incoming)
      if (in == id) return j.outgoing.at(0);
  throw InvalidParameter(fmt::format("entry '{}' feeds no junction", id));
}

std::vector<TopologyError> validate_topology(const Corridor& c) {
  std::vector<TopologyError> errors;
  auto fail = [&](std::string kind, std::string msg) {
    errors.push_back({std::move(kind), std::move(msg)});
  };
  std::set<std::string> ids;
  for (const auto& l : c.links)
    if (!ids.insert(l.id).second) fail("duplicate id", fmt::format("'{}' defined twice", l.id));
  for (const auto& e : c.entries)
    if (!ids.insert(e.id).second) fail("duplicate id", fmt::format("'{}' defined twice", e.id));

  for (const auto& l : c.links) {
    if (!l.fd.consistent()) {
      fail("FD inconsistency", fmt::format("link '{}': rho_c / capacity do not follow from (vf, w, rho_m)", l.id));
    }
    if (l.geometry.k_max < 1 || !(l.geometry.X > 0.0)) {
      fail("bad geometry", fmt::format("link '{}' has no segments", l.id));
    }
    if (l.is_vsl) {
      if (l.vsl.size() == 0) {
        fail("missing VSL set", fmt::format("link '{}' is speed controlled without candidates", l.id));
      } else if (!l.vsl.consistent(l.fd.w, l.fd.rho_m)) {
        fail("FD inconsistency", fmt::format("link '{}': speed-limit set violates the diagram", l.id));
      } else if (std::abs(*std::max_element(l.vsl.vf.begin(), l.vsl.vf.end()) - l.fd.vf) > 1e-9) {
        fail("FD inconsistency", fmt::format("link '{}': nominal speed is not the fastest candidate", l.id));
      }
    }
  }
  for (const auto& e : c.entries) {
    if (!(e.demand >= 0.0)) fail("bad entry", fmt::format("entry '{}' has negative demand", e.id));
  }

  std::map<std::string, int> as_incoming, as_outgoing;
  for (const auto& j : c.junctions) {
    const bool serial_ok = j.kind == JunctionKind::serial && j.incoming.size() == 1 && j.outgoing.size() == 1;
    const bool merge_ok = j.kind == JunctionKind::merge && j.incoming.size() == 2 && j.outgoing.size() == 1;
    if (!serial_ok && !merge_ok) {
      fail("unsupported junction", fmt::format("junction '{}': {} in / {} out", j.id, j.incoming.size(), j.outgoing.size()));
    }
    for (const auto& id : j.incoming) {
      if (!c.is_link(id) && !c.is_entry(id)) fail("dangling link", fmt::format("junction '{}' references unknown '{}'", j.id, id));
      ++as_incoming[id];
    }
    for (const auto& id : j.outgoing) {
      if (!c.is_link(id)) fail("dangling link", fmt::format("junction '{}' feeds unknown link '{}'", j.id, id));
      ++as_outgoing[id];
    }
    if (merge_ok) {
      const auto& ramp = j.incoming[1];
      if (!c.is_entry(ramp) || c.entry(ramp).controlled) {
        fail("unsupported junction", fmt::format("junction '{}': the second merge input must be an uncontrolled entry", j.id));
      }
    }
  }
  std::set<std::string> exits(c.exit_links.begin(), c.exit_links.end());
  if (exits.empty()) fail("no exit", "corridor has no exit link");
  for (const auto& id : exits)
    if (!c.is_link(id)) fail("dangling link", fmt::format("exit '{}' is not a link", id));
  for (const auto& cap : c.exit_capacity) {
    if (!exits.count(cap.link)) fail("dangling link", fmt::format("exit capacity on non-exit '{}'", cap.link));
    if (!(cap.supply >= 0.0)) fail("bad exit", fmt::format("exit capacity on '{}' is negative", cap.link));
  }
  for (const auto& l : c.links) {
    if (as_outgoing[l.id] != 1) {
      fail("dangling link", fmt::format("link '{}' is fed by {} junctions", l.id, as_outgoing[l.id]));
    }
    const int down = as_incoming[l.id] + (exits.count(l.id) ? 1 : 0);
    if (down != 1) {
      fail("dangling link", fmt::format("link '{}' has {} downstream ends", l.id, down));
    }
  }
  for (const auto& e : c.entries) {
    if (as_incoming[e.id] != 1) {
      fail("dangling link", fmt::format("entry '{}' feeds {} junctions", e.id, as_incoming[e.id]));
    }
  }
  if (c.controlled_entries().empty()) fail("no entry", "corridor has no controlled entry");
  if (errors.empty()) {
    try {
      (void)c.ordered_junctions();
    } catch (const InvalidParameter& ex) {
      fail("disconnected", ex.what());
    }
  }
  return errors;
}

void require_valid(const Corridor& corridor) {
  const auto errors = validate_topology(corridor);
  if (errors.empty()) return;
  std::string msg = "invalid corridor:";
  for (const auto& e : errors) msg += fmt::format("\n  {}: {}", e.kind, e.message);
  throw InvalidParameter(msg);
}

namespace {

const std::vector<int>& outflow_of(const Corridor& c, NetworkVariables& v, const std::string& id) {
  if (c.is_entry(id)) return v.entry_flow.at(id);
  return v.links.at(id).q_out;
}

}  // namespace

RowCounts build_node_constraints(LinearProgram& lp, const Corridor& c, const Junction& j,
                                 NetworkVariables& v, const NodeInputs& in) {
  RowCounts counts;
  auto& down = v.links.at(j.outgoing.at(0));
  const int N = down.steps();
  if (down.supply.size() != static_cast<std::size_t>(N)) {
    throw InvalidParameter(fmt::format("junction '{}': supply of '{}' not built", j.id, j.outgoing[0]));
  }
  auto demand_cap = [&](const std::string& id, int n) {
    if (!c.is_link(id)) return;
    const auto& up = v.links.at(id);
    if (up.demand.size() != static_cast<std::size_t>(N)) {
      throw InvalidParameter(fmt::format("junction '{}': demand of '{}' not built", j.id, id));
    }
    lp.add_le(LinExpr::var(up.q_out[n]), LinExpr::var(up.demand[n]),
              fmt::format("{}.D[{}]", j.id, n + 1));
    ++counts.emitted;
  };

  if (j.kind == JunctionKind::serial) {
    const auto& up = outflow_of(c, v, j.incoming.at(0));
    for (int n = 0; n < N; ++n) {
      lp.add_eq(LinExpr::var(up[n]), LinExpr::var(down.q_in[n]), fmt::format("{}.flow[{}]", j.id, n + 1));
      lp.add_le(LinExpr::var(down.q_in[n]), LinExpr::var(down.supply[n]), fmt::format("{}.S[{}]", j.id, n + 1));
      counts.emitted += 2;
      demand_cap(j.incoming[0], n);
    }
    return counts;
  }

  // merge: incoming[0] mainline, incoming[1] uncontrolled ramp
  const auto& main = outflow_of(c, v, j.incoming.at(0));
  const auto& ramp_id = j.incoming.at(1);
  const auto& ramp = v.entry_flow.at(ramp_id);
  const double d_r = c.entry(ramp_id).demand;
  const double e_r = in.entry_backlog.count(ramp_id) ? in.entry_backlog.at(ramp_id) : 0.0;
  const double s_max = lp.var(down.supply[0]).ub;
  auto& choice = v.merge_choice[j.id];
  choice.clear();
  LinExpr cum_ramp;
  for (int n = 0; n < N; ++n) {
    const auto tag = fmt::format("{}[{}]", j.id, n + 1);
    lp.add_eq(LinExpr::var(main[n]) + LinExpr::var(ramp[n]), LinExpr::var(down.q_in[n]), tag + ".flow");
    lp.add_le(LinExpr::var(down.q_in[n]), LinExpr::var(down.supply[n]), tag + ".S");
    counts.emitted += 2;
    demand_cap(j.incoming[0], n);
    cum_ramp.add(ramp[n], 1.0);
    // available ramp vehicles in rate units: backlog + arrivals so far - released before
    const double arrived = e_r + (n + 1) * d_r;
    lp.add_le(cum_ramp, arrived, tag + ".ramp_avail");
    ++counts.emitted;
    // z = 1: the ramp is supply-limited and takes the whole supply
    const int z = lp.add_binary(fmt::format("{}.ramp_limited", tag));
    choice.push_back(z);
    if (arrived > 0.0) {
      lp.add_ge(cum_ramp + LinExpr::var(z, arrived), arrived, tag + ".ramp_first");
      ++counts.emitted;
    }
    lp.add_ge(LinExpr::var(ramp[n]) - LinExpr::var(down.supply[n]) - LinExpr::var(z, s_max), -s_max,
              tag + ".ramp_takes_supply");
    ++counts.emitted;
  }
  return counts;
}

RowCounts build_exit_constraints(LinearProgram& lp, const Corridor& c, NetworkVariables& v,
                                 const NodeInputs& in) {
  RowCounts counts;
  for (const auto& id : c.exit_links) {
    auto& l = v.links.at(id);
    for (int n = 0; n < l.steps(); ++n) {
      if (l.demand.size() != static_cast<std::size_t>(l.steps())) {
        throw InvalidParameter(fmt::format("exit '{}': demand not built", id));
      }
      lp.add_le(LinExpr::var(l.q_out[n]), LinExpr::var(l.demand[n]), fmt::format("{}.exit_D[{}]", id, n + 1));
      ++counts.emitted;
      const double s = c.exit_supply(id, in.t0 + n * in.T);
      auto& var = lp.vars()[l.q_out[n]];
      var.ub = std::max(var.lb, std::min(var.ub, s));
    }
  }
  return counts;
}

MergeFlows resolve_merge(double main_demand, double ramp_available, double supply) {
  MergeFlows f;
  supply = std::max(0.0, supply);
  f.ramp = std::clamp(ramp_available, 0.0, supply);
  f.main = std::clamp(main_demand, 0.0, supply - f.ramp);
  return f;
}

}  // namespace stochvsl
