#include "stochvsl/rh_controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>

namespace stochvsl {

const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::two_stage: return "two-stage";
    case ControllerKind::d_min: return "d-min";
    case ControllerKind::d_mean: return "d-mean";
    case ControllerKind::d_max: return "d-max";
  }
  return "unknown";
}

ControllerKind parse_controller(const std::string& name) {
  for (auto k : kAllControllers)
    if (name == to_string(k)) return k;
  throw InvalidParameter(fmt::format("unknown controller '{}' (two-stage, d-min, d-mean, d-max)", name));
}

ControllerError::ControllerError(int horizon, const std::string& what)
    : std::runtime_error(fmt::format("horizon {}: {}", horizon, what)), horizon_(horizon) {}

CorridorSimulator::CorridorSimulator(Corridor corridor, double T, const HorizonState& initial)
    : c_(std::move(corridor)), T_(T), t_(initial.t0), t_chain_(initial.t0) {
  require_valid(c_);
  if (!(T > 0.0)) throw InvalidParameter("time step must be positive");
  for (const auto& l : c_.links) {
    auto it = initial.density.find(l.id);
    if (it == initial.density.end() || static_cast<int>(it->second.size()) != l.geometry.k_max) {
      throw InvalidParameter(fmt::format("initial densities missing for link '{}'", l.id));
    }
    LinkState s{l.fd, {}};
    s.vc.initial_density = it->second;
    s.vc.T = T;
    s.vc.validate(l.fd, l.geometry);
    links_.emplace(l.id, std::move(s));
    if (l.is_vsl) speed_[l.id] = l.speed_index(l.fd.vf);
  }
  for (const auto& e : c_.entries) {
    auto it = initial.queue.find(e.id);
    queue_[e.id] = it == initial.queue.end() ? 0.0 : it->second;
    if (queue_[e.id] < 0.0) throw InvalidParameter(fmt::format("negative queue at '{}'", e.id));
  }
}

const TriangularFD& CorridorSimulator::fd(const std::string& link) const { return links_.at(link).fd; }

std::vector<double> CorridorSimulator::densities(const std::string& link) const {
  const auto& s = links_.at(link);
  if (s.vc.steps() == 0) return s.vc.initial_density;
  auto rho = segment_densities(s.vc, s.fd, c_.link(link).geometry, t_ - t_chain_);
  for (double& r : rho) r = std::clamp(r, 0.0, s.fd.rho_m);
  return rho;
}

double CorridorSimulator::stored() const {
  double v = 0.0;
  for (const auto& l : c_.links)
    for (double r : densities(l.id)) v += r * l.geometry.X;
  return v;
}

HorizonState CorridorSimulator::state(int steps) const {
  HorizonState s;
  for (const auto& l : c_.links) s.density[l.id] = densities(l.id);
  s.queue = queue_;
  s.steps = steps;
  s.T = T_;
  s.t0 = t_;
  return s;
}

void CorridorSimulator::chain() {
  for (auto& [id, s] : links_) {
    if (s.vc.steps() == 0) continue;
    auto rho = densities(id);
    s.vc.initial_density = std::move(rho);
    s.vc.inflow.clear();
    s.vc.outflow.clear();
  }
  t_chain_ = t_;
}

void CorridorSimulator::set_speed(const std::string& link, int index) {
  const auto& spec = c_.link(link);
  if (!spec.is_vsl || index < 0 || index >= spec.speed_count()) {
    throw InvalidParameter(fmt::format("speed index {} invalid for link '{}'", index, link));
  }
  chain();
  links_.at(link).fd = spec.fd_for(index);
  speed_[link] = index;
}

CorridorSimulator::StepFlows CorridorSimulator::step(const std::map<std::string, double>& control,
                                                     const std::map<std::string, double>& demand) {
  std::map<std::string, double> D, S;
  for (const auto& l : c_.links) {
    const auto& s = links_.at(l.id);
    D[l.id] = std::max(0.0, compatible_outflow_limit(s.vc, s.fd, l.geometry));
    S[l.id] = std::max(0.0, compatible_inflow_limit(s.vc, s.fd, l.geometry));
  }
  std::map<std::string, double> waiting;
  for (const auto& e : c_.entries) {
    auto it = demand.find(e.id);
    const double d = it != demand.end() ? it->second : (e.controlled ? 0.0 : e.demand);
    if (d < 0.0) throw InvalidParameter(fmt::format("negative demand at '{}'", e.id));
    waiting[e.id] = queue_.at(e.id) + d;
  }
  auto available = [&](const std::string& id) {
    if (c_.is_link(id)) return D.at(id);
    const auto& e = c_.entry(id);
    if (!e.controlled) return waiting.at(id);
    auto it = control.find(id);
    if (it == control.end()) throw InvalidParameter(fmt::format("no control for entry '{}'", id));
    return std::min(std::max(0.0, it->second), waiting.at(id));
  };

  StepFlows f;
  std::map<std::string, double> sent;  // per incoming element
  for (const auto* j : c_.ordered_junctions()) {
    const auto& down = j->outgoing[0];
    double in = 0.0;
    if (j->kind == JunctionKind::serial) {
      in = std::min(available(j->incoming[0]), S.at(down));
      sent[j->incoming[0]] = in;
    } else {
      const auto m = resolve_merge(available(j->incoming[0]), available(j->incoming[1]), S.at(down));
      sent[j->incoming[0]] = m.main;
      sent[j->incoming[1]] = m.ramp;
      in = m.main + m.ramp;
    }
    f.q_in[down] = in;
  }
  for (const auto& id : c_.exit_links) sent[id] = std::min(D.at(id), c_.exit_supply(id, t_));

  for (const auto& e : c_.entries) {
    const double q = sent.count(e.id) ? sent.at(e.id) : 0.0;
    queue_[e.id] = std::max(0.0, waiting.at(e.id) - q);
    if (e.controlled) f.entry_inflow += q;
    else f.ramp_inflow += q;
  }
  for (const auto& l : c_.links) {
    f.q_out[l.id] = sent.at(l.id);
    auto& vc = links_.at(l.id).vc;
    vc.inflow.push_back(f.q_in.at(l.id));
    vc.outflow.push_back(f.q_out.at(l.id));
  }
  t_ += T_;
  return f;
}

ClosedLoopSettings settings_from(const ExperimentConfig& cfg) {
  ClosedLoopSettings s;
  s.dist = cfg.demand;
  s.weights = cfg.weights;
  s.horizon = cfg.horizon;
  s.solver = cfg.solver;
  return s;
}

HorizonState empty_state(const Corridor& corridor, const HorizonConfig& h) {
  HorizonState s;
  for (const auto& l : corridor.links) s.density[l.id] = std::vector<double>(l.geometry.k_max, 0.0);
  for (const auto& e : corridor.entries) s.queue[e.id] = 0.0;
  s.steps = h.project_steps;
  s.T = h.T;
  return s;
}

namespace {

double model_level(ControllerKind k, const DemandDistribution& d) {
  switch (k) {
    case ControllerKind::d_min: return d.min();
    case ControllerKind::d_max: return d.max();
    default: return d.mean();
  }
}

SolveRecord record(const Solution& s) {
  return {to_string(s.status), s.objective, s.bound, s.root_relaxation, s.nodes, s.seconds};
}

Solution solve_or_throw(const HorizonModel& m, SolveOptions opts, const std::map<std::string, int>& speeds,
                        int horizon, const char* what) {
  for (const auto& blk : m.blocks) {
    for (const auto& [link, s] : speeds) {
      const auto& delta = blk.net.links.at(link).delta;
      for (int i = 0; i < static_cast<int>(delta.size()); ++i) opts.hint.emplace_back(delta[i], i == s ? 1.0 : 0.0);
    }
  }
  Solution s;
  try {
    s = branch_and_bound(m.lp, opts);
    if (std::getenv("STOCHVSL_TRACE")) {
      fmt::print(stderr, "h{} {} {} nodes={} it={} {:.2f}s obj={:.6f} bound={:.6f}\n", horizon, what,
                 to_string(s.status), s.nodes, s.lp_iterations, s.seconds, s.objective, s.bound);
    }
  } catch (const std::exception& ex) {
    throw ControllerError(horizon, fmt::format("{} solve failed: {}", what, ex.what()));
  }
  if (!s.has_solution()) {
    throw ControllerError(horizon, fmt::format("{} model has no solution ({})", what, to_string(s.status)));
  }
  return s;
}

std::vector<double> control_values(const HorizonModel& m, const Solution& s, const std::string& entry) {
  std::vector<double> out;
  for (int v : m.control.at(entry)) out.push_back(s.x[v]);
  return out;
}

}  // namespace

HorizonModel plan_model(const Corridor& corridor, const HorizonState& state, ControllerKind kind,
                        const ClosedLoopSettings& cfg) {
  if (kind == ControllerKind::two_stage) return build_deterministic_equivalent(corridor, state, cfg.dist, cfg.weights);
  return build_deterministic_baseline(corridor, state, model_level(kind, cfg.dist), cfg.weights);
}

Trajectory run_closed_loop(const Corridor& corridor, const std::vector<double>& stream,
                           ControllerKind kind, const ClosedLoopSettings& cfg, std::uint64_t seed) {
  require_valid(corridor);
  cfg.dist.validate();
  cfg.weights.validate();
  cfg.horizon.validate();
  const auto controlled = corridor.controlled_entries();
  if (controlled.size() != 1) throw InvalidParameter("the closed loop expects exactly one controlled entry");
  const auto& entry = controlled[0];
  for (double level : stream) {
    if (!cfg.dist.contains(level, 1e-9)) {
      throw InvalidParameter(fmt::format("realized demand {} is not a level of the distribution", level));
    }
  }
  const int N = cfg.horizon.project_steps;
  const int R = cfg.horizon.rolling_steps;
  const double T = cfg.horizon.T;
  const double Q = corridor.link(corridor.downstream_of_entry(entry)).q_max();
  const double assumed = model_level(kind, cfg.dist);

  CorridorSimulator sim(corridor, T, empty_state(corridor, cfg.horizon));
  Trajectory traj;
  traj.controller = kind;
  traj.seed = seed;
  traj.T = T;
  traj.project_steps = N;
  traj.initial_stored = sim.stored();
  for (const auto& [id, q] : sim.queues()) traj.initial_queue += q;

  std::map<std::string, int> speeds;
  for (const auto& id : corridor.vsl_links()) speeds[id] = sim.speed(id);

  auto run_step = [&](int h, double level, double control) {
    const auto f = sim.step({{entry, control}}, {{entry, level}});
    StepRecord r;
    r.step = static_cast<int>(traj.steps.size());
    r.horizon = h;
    r.t = sim.time() - T;
    r.demand = level;
    r.control = control;
    r.inflow = f.entry_inflow;
    r.ramp_inflow = f.ramp_inflow;
    const auto q = sim.queues();
    r.queue = q.at(entry);
    for (const auto& [id, v] : q)
      if (id != entry) r.ramp_queue += v;
    r.q_in = f.q_in;
    r.q_out = f.q_out;
    for (const auto& l : corridor.links) {
      r.density[l.id] = sim.densities(l.id);
      r.speed_limit[l.id] = sim.fd(l.id).vf;
    }
    for (const auto& id : corridor.exit_links) r.exit_outflow += f.q_out.at(id);
    double arrivals = level;
    for (const auto& e : corridor.entries)
      if (!e.controlled) arrivals += e.demand;
    traj.total_arrivals += arrivals * T;
    traj.total_entered += (f.entry_inflow + f.ramp_inflow) * T;
    traj.total_exited += r.exit_outflow * T;
    traj.steps.push_back(std::move(r));
  };

  for (int h = 0; h < static_cast<int>(stream.size()); ++h) {
    const double level = stream[h];
    HorizonRecord hr;
    hr.index = h;
    hr.t0 = sim.time();
    hr.level = level;
    hr.initial_queue = sim.queues().at(entry);
    hr.demand_column = apply_queue_update(std::vector<double>(N, level), hr.initial_queue, Q).demand;

    // plan at t0 with the controller's view of the demand
    hr.start = sim.state(N);
    HorizonModel plan;
    try {
      plan = plan_model(corridor, hr.start, kind, cfg);
    } catch (const std::exception& ex) {
      throw ControllerError(h, fmt::format("plan model: {}", ex.what()));
    }
    const auto ps = solve_or_throw(plan, cfg.solver, speeds, h, "plan");
    hr.plan = record(ps);
    if (cfg.on_solve) cfg.on_solve(plan, ps);
    const auto first = control_values(plan, ps, entry);
    for (int t = 0; t < R; ++t) run_step(h, level, first[t]);

    // level observed: re-plan speed limits and the rest of the control
    std::vector<double> rest;
    if (R < N) {
      const double tail = kind == ControllerKind::two_stage ? cfg.dist.mean() : assumed;
      const auto observed = sim.state(N);
      auto column = observed_demand_vector(level, tail, N, R);
      column = apply_queue_update(std::move(column), observed.queue.at(entry), Q).demand;
      ModelOptions opts;
      opts.previous_inflow[entry] = traj.steps.back().inflow;
      opts.project_boundary = N - R;
      HorizonModel replan;
      try {
        replan = build_two_stage(corridor, observed, {Scenario{1.0, {{entry, column}}}}, cfg.weights, opts);
      } catch (const std::exception& ex) {
        throw ControllerError(h, fmt::format("re-plan model: {}", ex.what()));
      }
      auto rs = solve_or_throw(replan, cfg.solver, speeds, h, "re-plan");
      if (cfg.on_solve) cfg.on_solve(replan, rs);
      // keep the active speed limit unless another one is strictly better
      for (const auto& [link, s] : speeds) {
        if (chosen_speed(replan, rs.x, link) == s) continue;
        ModelOptions keep = opts;
        keep.fixed_speed[link] = s;
        const auto alt_model = build_two_stage(corridor, observed, {Scenario{1.0, {{entry, column}}}},
                                               cfg.weights, keep);
        auto alt = branch_and_bound(alt_model.lp, cfg.solver);
        if (cfg.on_solve && alt.has_solution()) cfg.on_solve(alt_model, alt);
        const double tol = cfg.solver.relative_gap * std::max(1.0, std::abs(rs.objective));
        if (alt.has_solution() && alt.objective >= rs.objective - tol) {
          rs = std::move(alt);
          replan = alt_model;
        }
      }
      hr.replan = record(rs);
      for (auto& [link, s] : speeds) {
        s = chosen_speed(replan, rs.x, link);
        sim.set_speed(link, s);
      }
      sim.chain();
      rest = control_values(replan, rs, entry);
    }
    for (int t = R; t < N; ++t) run_step(h, level, rest[t - R]);
    sim.chain();
    traj.horizons.push_back(std::move(hr));
  }
  traj.final_stored = sim.stored();
  for (const auto& [id, q] : sim.queues()) traj.final_queue += q;
  return traj;
}

double conservation_error(const Trajectory& t) {
  const double road = t.initial_stored + t.total_entered - t.total_exited - t.final_stored;
  const double queue = t.initial_queue * t.T + t.total_arrivals - t.total_entered - t.final_queue * t.T;
  return std::max(std::abs(road) / std::max(1.0, t.total_entered),
                  std::abs(queue) / std::max(1.0, t.total_arrivals));
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  std::size_t kmax = 0;
  for (const auto& s : traj.steps)
    for (const auto& [id, rho] : s.density) kmax = std::max(kmax, rho.size());
  out << "controller,seed,step,horizon,t,element,q_in,q_out,queue,control,demand,speed_limit";
  for (std::size_t k = 1; k <= kmax; ++k) out << ",rho_" << k;
  out << "\n";
  for (const auto& s : traj.steps) {
    const auto head = fmt::format("{},{},{},{},{:g}", to_string(traj.controller), traj.seed, s.step, s.horizon, s.t);
    out << fmt::format("{},entry,,{:.9g},{:.9g},{:.9g},{:.9g},", head, s.inflow, s.queue, s.control, s.demand);
    out << std::string(kmax, ',') << "\n";
    out << fmt::format("{},ramp,,{:.9g},{:.9g},,,", head, s.ramp_inflow, s.ramp_queue);
    out << std::string(kmax, ',') << "\n";
    for (const auto& [id, rho] : s.density) {
      out << fmt::format("{},{},{:.9g},{:.9g},,,,{:g}", head, id, s.q_in.at(id), s.q_out.at(id), s.speed_limit.at(id));
      for (std::size_t k = 0; k < kmax; ++k) {
        out << ",";
        if (k < rho.size()) out << fmt::format("{:.9g}", rho[k]);
      }
      out << "\n";
    }
  }
}

}  // namespace stochvsl
