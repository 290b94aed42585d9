#include "stochvsl/stochastic_program.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace stochvsl {

void ObjectiveWeights::validate() const {
  for (double w : {w0, w1, w2, w3, w4}) {
    if (!(w >= 0.0)) throw InvalidParameter("objective weights must be nonnegative");
  }
}

namespace {

bool fed_by_merge(const Corridor& c, const std::string& link) {
  for (const auto& j : c.junctions)
    if (j.kind == JunctionKind::merge && j.outgoing.at(0) == link) return true;
  return false;
}

void check_state(const Corridor& c, const HorizonState& s) {
  if (s.steps < 1) throw InvalidParameter("horizon needs at least one step");
  if (!(s.T > 0.0)) throw InvalidParameter("time step must be positive");
  for (const auto& l : c.links) {
    auto it = s.density.find(l.id);
    if (it == s.density.end()) throw InvalidParameter(fmt::format("no initial density for link '{}'", l.id));
    if (static_cast<int>(it->second.size()) != l.geometry.k_max) {
      throw InvalidParameter(fmt::format("link '{}': {} densities for {} segments", l.id,
                                         it->second.size(), l.geometry.k_max));
    }
    for (double r : it->second) {
      if (!(r >= -1e-9 && r <= l.fd.rho_m + 1e-9)) {
        throw InvalidParameter(fmt::format("link '{}': initial density {} outside [0, {}]", l.id, r, l.fd.rho_m));
      }
    }
    // boundary waves must not cross a link within one step
    const double L = l.geometry.length();
    double vmax = l.fd.vf;
    if (l.is_vsl) vmax = *std::max_element(l.vsl.vf.begin(), l.vsl.vf.end());
    if (L / vmax < s.T - 1e-9 || L / -l.fd.w < s.T - 1e-9) {
      throw InvalidParameter(fmt::format("link '{}' is shorter than one step of wave travel", l.id));
    }
  }
  for (const auto& [id, e] : s.queue) {
    if (!(e >= 0.0)) throw InvalidParameter(fmt::format("negative queue at '{}'", id));
  }
}

double queue_of(const HorizonState& s, const std::string& id) {
  auto it = s.queue.find(id);
  return it == s.queue.end() ? 0.0 : it->second;
}

std::vector<double> clamp_density(const std::vector<double>& rho, double rho_m) {
  std::vector<double> out;
  for (double r : rho) out.push_back(std::clamp(r, 0.0, rho_m));
  return out;
}

}  // namespace

HorizonModel build_two_stage(const Corridor& corridor, const HorizonState& state,
                             std::vector<Scenario> scenarios, const ObjectiveWeights& weights,
                             const ModelOptions& options) {
  require_valid(corridor);
  check_state(corridor, state);
  weights.validate();
  if (scenarios.empty()) throw InvalidParameter("no demand scenarios");
  if (options.project_boundary < 0 || options.project_boundary >= state.steps) {
    throw InvalidParameter(fmt::format("project boundary {} outside the window", options.project_boundary));
  }
  double total_p = 0.0;
  for (const auto& sc : scenarios) total_p += sc.probability;
  if (std::abs(total_p - 1.0) > 1e-9) throw InvalidParameter(fmt::format("probabilities sum to {}", total_p));

  const int N = state.steps;
  const double T = state.T;
  const auto controlled = corridor.controlled_entries();
  HorizonModel m;
  m.corridor = corridor;
  m.state = state;
  m.weights = weights;
  m.options = options;
  auto& lp = m.lp;

  LinExpr objective;
  for (const auto& e : controlled) {
    const double cap = corridor.link(corridor.downstream_of_entry(e)).q_max();
    auto& q = m.control[e];
    for (int t = 1; t <= N; ++t) {
      q.push_back(lp.add_var(fmt::format("{}.control[{}]", e, t), 0.0, cap));
      objective.add(q.back(), weights.w0);
    }
  }

  NodeInputs nodes{T, state.t0, {}};
  for (const auto& e : corridor.entries)
    if (!e.controlled) nodes.entry_backlog[e.id] = queue_of(state, e.id);

  for (std::size_t j = 0; j < scenarios.size(); ++j) {
    const auto& sc = scenarios[j];
    const double p = sc.probability;
    ScenarioBlock b;
    const auto tag = fmt::format("s{}", j);
    for (const auto& link : corridor.links) {
      const auto rho = clamp_density(state.density.at(link.id), link.fd.rho_m);
      auto v = make_link_variables(lp, link, N, T, fmt::format("{}.{}", tag, link.id));
      build_compatibility(lp, link, v, rho);
      if (link.is_vsl) {
        build_vsl_linearization(lp, link, v);
        if (auto it = options.fixed_speed.find(link.id); it != options.fixed_speed.end()) {
          for (int s = 0; s < link.speed_count(); ++s) {
            auto& d = lp.vars()[v.delta[s]];
            d.lb = d.ub = s == it->second ? 1.0 : 0.0;
          }
        }
      }
      const auto supply_mode = fed_by_merge(corridor, link.id) ? BoundMode::exact : BoundMode::upper;
      build_demand_supply(lp, link, v, rho, BoundMode::upper, supply_mode);
      b.net.links.emplace(link.id, std::move(v));
    }
    for (const auto& e : corridor.entries) {
      const double cap = corridor.link(corridor.downstream_of_entry(e.id)).q_max();
      auto& f = b.net.entry_flow[e.id];
      for (int t = 1; t <= N; ++t) f.push_back(lp.add_var(fmt::format("{}.{}.q[{}]", tag, e.id, t), 0.0, cap));
    }
    for (const auto* junction : corridor.ordered_junctions()) {
      build_node_constraints(lp, corridor, *junction, b.net, nodes);
    }
    build_exit_constraints(lp, corridor, b.net, nodes);

    // recourse: inflow equals the control unless the waiting demand runs out
    for (const auto& e : controlled) {
      auto it = sc.demand.find(e);
      if (it == sc.demand.end() || static_cast<int>(it->second.size()) != N) {
        throw InvalidParameter(fmt::format("scenario {} lacks a {}-step demand for '{}'", j, N, e));
      }
      const auto& d = it->second;
      const auto& q = b.net.entry_flow.at(e);
      const auto& ctrl = m.control.at(e);
      const double cap = lp.var(ctrl[0]).ub;
      auto& delta = b.recourse_delta[e];
      LinExpr cum_q;
      double cum_d = 0.0;
      for (int t = 0; t < N; ++t) {
        const auto rt = fmt::format("{}.{}.recourse[{}]", tag, e, t + 1);
        cum_q.add(q[t], 1.0);
        cum_d += d[t];
        delta.push_back(lp.add_binary(fmt::format("{}.{}.exhausted[{}]", tag, e, t + 1)));
        lp.add_le(LinExpr::var(q[t]), LinExpr::var(ctrl[t]), rt + ".below_control");
        lp.add_le(cum_q, cum_d, rt + ".below_demand");
        lp.add_ge(LinExpr::var(q[t]) + LinExpr::var(delta.back(), cap), LinExpr::var(ctrl[t]), rt + ".at_control");
        lp.add_ge(cum_q - LinExpr::var(delta.back(), cum_d), 0.0, rt + ".at_demand");
      }
      // objective pieces for this entry
      const double e0 = queue_of(state, e);
      for (int t = 0; t < N; ++t) {
        objective.add(q[t], -p * weights.w2);
        // block: -(1 + e) * sum_t sum_{i<=t} (d - q)  -> q(i) weighted by (N - i + 1)
        objective.add(q[t], p * weights.w3 * (1.0 + e0) * (N - t));
        objective += LinExpr(-p * weights.w3 * (1.0 + e0) * (N - t) * d[t]);
      }
      auto& u = b.fluctuation[e];
      auto add_epigraph = [&](const LinExpr& diff, const std::string& name) {
        const int var = lp.add_var(name, 0.0, kInf);
        u.push_back(var);
        lp.add_ge(LinExpr::var(var), diff, name + ".pos");
        lp.add_ge(LinExpr::var(var), -diff, name + ".neg");
        objective.add(var, -p * weights.w4);
      };
      if (auto prev = options.previous_inflow.find(e); prev != options.previous_inflow.end()) {
        add_epigraph(LinExpr::var(q[0]) - LinExpr(prev->second), fmt::format("{}.{}.u[0]", tag, e));
      }
      for (int t = 0; t + 1 < N; ++t) {
        if (t + 1 == options.project_boundary) continue;
        add_epigraph(LinExpr::var(q[t + 1]) - LinExpr::var(q[t]), fmt::format("{}.{}.u[{}]", tag, e, t + 1));
      }
    }
    for (const auto& id : corridor.exit_links) {
      const auto& v = b.net.links.at(id);
      for (int t = 0; t < N; ++t) objective.add(v.q_out[t], p * (N - t));
    }
    for (const auto& id : corridor.vsl_links()) {
      const auto& v = b.net.links.at(id);
      for (int t = 0; t < N; ++t) objective.add(v.q_in[t], -p * weights.w1);
    }
    m.blocks.push_back(std::move(b));
  }
  m.scenarios = std::move(scenarios);
  lp.set_objective(objective, true);
  return m;
}

std::vector<Scenario> scenarios_from(const Corridor& corridor, const HorizonState& state,
                                     const DemandDistribution& dist) {
  dist.validate();
  // zero-probability levels carry no weight and are left out
  std::vector<Scenario> out(dist.size());
  for (int j = 0; j < dist.size(); ++j) out[j].probability = dist.probabilities[j];
  for (const auto& e : corridor.controlled_entries()) {
    const double cap = corridor.link(corridor.downstream_of_entry(e)).q_max();
    const auto cols = scenario_demands(dist, state.steps, queue_of(state, e), cap);
    for (int j = 0; j < dist.size(); ++j) out[j].demand[e] = cols[j].demand;
  }
  std::erase_if(out, [](const Scenario& s) { return s.probability <= 0.0; });
  return out;
}

HorizonModel build_deterministic_equivalent(const Corridor& corridor, const HorizonState& state,
                                            const DemandDistribution& dist,
                                            const ObjectiveWeights& weights,
                                            const ModelOptions& options) {
  return build_two_stage(corridor, state, scenarios_from(corridor, state, dist), weights, options);
}

HorizonModel build_deterministic_baseline(const Corridor& corridor, const HorizonState& state,
                                          double fixed_demand, const ObjectiveWeights& weights,
                                          const ModelOptions& options) {
  if (!(fixed_demand >= 0.0)) throw InvalidParameter("fixed demand must be nonnegative");
  return build_deterministic_equivalent(corridor, state, DemandDistribution::point(fixed_demand),
                                        weights, options);
}

ObjectiveTerms objective_breakdown(const HorizonModel& m, const std::vector<double>& x) {
  ObjectiveTerms out;
  const auto& w = m.weights;
  const int N = m.state.steps;
  for (const auto& [e, q] : m.control)
    for (int var : q) out.control += w.w0 * x.at(var);
  out.total = out.control;
  for (std::size_t j = 0; j < m.blocks.size(); ++j) {
    const auto& b = m.blocks[j];
    const auto& sc = m.scenarios[j];
    ScenarioTerms st;
    for (const auto& id : m.corridor.exit_links) {
      const auto& v = b.net.links.at(id);
      for (int t = 0; t < N; ++t) st.outflow += (N - t) * x.at(v.q_out[t]);
    }
    for (const auto& id : m.corridor.vsl_links()) {
      const auto& v = b.net.links.at(id);
      for (int t = 0; t < N; ++t) st.vsl_inflow += w.w1 * x.at(v.q_in[t]);
    }
    for (const auto& [e, q] : b.recourse_delta) {
      (void)q;
      const auto& flow = b.net.entry_flow.at(e);
      const auto& d = sc.demand.at(e);
      const double e0 = m.state.queue.count(e) ? m.state.queue.at(e) : 0.0;
      double cum = 0.0, blocked = 0.0;
      for (int t = 0; t < N; ++t) {
        st.entry_inflow += w.w2 * x.at(flow[t]);
        cum += d[t] - x.at(flow[t]);
        blocked += cum;
      }
      st.block += w.w3 * (1.0 + e0) * blocked;
      double fl = 0.0;
      if (auto prev = m.options.previous_inflow.find(e); prev != m.options.previous_inflow.end()) {
        fl += std::abs(x.at(flow[0]) - prev->second);
      }
      for (int t = 0; t + 1 < N; ++t) {
        if (t + 1 != m.options.project_boundary) fl += std::abs(x.at(flow[t + 1]) - x.at(flow[t]));
      }
      st.fluctuation += w.w4 * fl;
    }
    out.total += sc.probability * st.value();
    out.scenarios.push_back(st);
  }
  return out;
}

int chosen_speed(const HorizonModel& m, const std::vector<double>& x, const std::string& link,
                 int scenario) {
  const auto& v = m.blocks.at(scenario).net.links.at(link);
  if (v.delta.empty()) throw InvalidParameter(fmt::format("link '{}' has no speed choice", link));
  int best = 0;
  for (int s = 1; s < static_cast<int>(v.delta.size()); ++s)
    if (x.at(v.delta[s]) > x.at(v.delta[best])) best = s;
  return best;
}

}  // namespace stochvsl
