#include "stochvsl/link_model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <optional>

namespace stochvsl {

VslSets VslSets::make(const std::vector<double>& speeds, double w, double rho_m) {
  if (speeds.empty()) throw InvalidParameter("speed-limit set is empty");
  VslSets s;
  for (double v : speeds) {
    const auto fd = TriangularFD::make(v, w, rho_m);
    s.vf.push_back(fd.vf);
    s.rho_c.push_back(fd.rho_c);
    s.Q.push_back(fd.capacity);
  }
  return s;
}

double VslSets::q_max() const { return *std::max_element(Q.begin(), Q.end()); }

bool VslSets::consistent(double w, double rho_m, double tol) const {
  if (vf.empty() || vf.size() != rho_c.size() || vf.size() != Q.size()) return false;
  for (int s = 0; s < size(); ++s) {
    TriangularFD fd{vf[s], w, rho_m, rho_c[s], Q[s]};
    if (!fd.consistent(tol)) return false;
  }
  return true;
}

TriangularFD LinkSpec::fd_for(int s) const {
  if (!is_vsl) return fd;
  return TriangularFD{vsl.vf.at(s), fd.w, fd.rho_m, vsl.rho_c.at(s), vsl.Q.at(s)};
}

int LinkSpec::speed_index(double v) const {
  for (int s = 0; s < speed_count(); ++s)
    if (std::abs(fd_for(s).vf - v) <= 1e-9) return s;
  return -1;
}

LinkVariables make_link_variables(LinearProgram& lp, const LinkSpec& link, int n_max, double T,
                                  const std::string& tag) {
  if (n_max < 1) throw InvalidParameter("horizon needs at least one step");
  if (!(T > 0.0)) throw InvalidParameter("time step must be positive");
  if (link.is_vsl && !link.vsl.consistent(link.fd.w, link.fd.rho_m)) {
    throw InvalidParameter(fmt::format("link {}: inconsistent speed-limit set", link.id));
  }
  LinkVariables v;
  v.T = T;
  const double q = link.q_max();
  for (int n = 1; n <= n_max; ++n) v.q_in.push_back(lp.add_var(fmt::format("{}.qin[{}]", tag, n), 0.0, q));
  for (int n = 1; n <= n_max; ++n) v.q_out.push_back(lp.add_var(fmt::format("{}.qout[{}]", tag, n), 0.0, q));
  if (!link.is_vsl) return v;
  const auto& set = link.vsl;
  double k_top = 0.0;
  for (int s = 0; s < set.size(); ++s) {
    v.delta.push_back(lp.add_binary(fmt::format("{}.delta[{}]", tag, set.vf[s])));
    k_top = std::max(k_top, set.Q[s] / set.vf[s]);
  }
  v.k_a.resize(set.size());
  for (int s = 0; s < set.size(); ++s)
    for (int n = 1; n <= n_max; ++n)
      v.k_a[s].push_back(lp.add_var(fmt::format("{}.ka[{}][{}]", tag, set.vf[s], n), 0.0,
                                    set.Q[s] / set.vf[s]));
  for (int n = 1; n <= n_max; ++n)
    v.k_in.push_back(lp.add_var(fmt::format("{}.kin[{}]", tag, n), 0.0, k_top));
  return v;
}

namespace {

double min_activity(const LinearProgram& lp, const LinExpr& e) {
  double m = e.constant();
  for (const auto& t : e.terms()) {
    const auto& v = lp.var(t.var);
    m += t.coef > 0 ? t.coef * v.lb : t.coef * v.ub;
  }
  return m;
}

double max_activity(const LinearProgram& lp, const LinExpr& e) {
  return -min_activity(lp, -e);
}

LinExpr variable_part(const LinExpr& e) { return e - LinExpr(e.constant()); }

bool same_terms(const LinExpr& a, const LinExpr& b) {
  const auto& x = a.terms();
  const auto& y = b.terms();
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].var != y[i].var) return false;
    if (std::abs(x[i].coef - y[i].coef) > 1e-12 * std::max(1.0, std::abs(x[i].coef))) return false;
  }
  return true;
}

// Collects rows "expr >= 0", dropping rows implied by variable bounds and
// keeping only the tightest of rows with identical variable parts.
class RowPool {
 public:
  explicit RowPool(LinearProgram& lp) : lp_(lp) {}

  void add(const LinExpr& raw, const std::string& name) {
    const LinExpr e = raw.normalized();
    if (e.is_constant()) {
      if (e.constant() < -1e-7) {
        throw InvalidParameter(fmt::format("row {} cannot hold: {} >= 0", name, e.constant()));
      }
      ++counts_.redundant;
      return;
    }
    if (min_activity(lp_, e) >= -1e-9) {
      ++counts_.redundant;
      return;
    }
    std::vector<std::pair<int, double>> key;
    for (const auto& t : e.terms()) key.emplace_back(t.var, t.coef);
    auto [it, inserted] = index_.try_emplace(std::move(key), rows_.size());
    if (inserted) {
      rows_.push_back({e, name});
      return;
    }
    ++counts_.redundant;
    auto& kept = rows_[it->second];
    if (e.constant() < kept.expr.constant()) kept = {e, name};
  }

  // Active only when the binary `on` is 1: expr + M (1 - on) >= 0.
  void add_gated(const LinExpr& raw, int on, const std::string& name) {
    const LinExpr e = raw.normalized();
    const double low = min_activity(lp_, e);
    if (low >= -1e-9) {
      ++counts_.redundant;
      return;
    }
    const double big = -low;
    ++counts_.gated;
    add(e + LinExpr(big) - LinExpr::var(on, big), name);
  }

  RowCounts flush() {
    for (const auto& r : rows_) {
      lp_.add_ge(variable_part(r.expr), -r.expr.constant(), r.name);
      ++counts_.emitted;
    }
    rows_.clear();
    index_.clear();
    return counts_;
  }

 private:
  struct Pending {
    LinExpr expr;
    std::string name;
  };
  LinearProgram& lp_;
  RowCounts counts_;
  std::map<std::vector<std::pair<int, double>>, std::size_t> index_;
  std::vector<Pending> rows_;
};

struct SymbolicFlows {
  using Scalar = LinExpr;
  const LinkVariables& v;
  double vf;
  bool use_k;
  LinExpr zero() const { return {}; }
  LinExpr in(int i) const { return LinExpr::var(v.q_in[i - 1]); }
  LinExpr out(int i) const { return LinExpr::var(v.q_out[i - 1]); }
  LinExpr in_over_vf(int i) const {
    return use_k ? LinExpr::var(v.k_in[i - 1]) : LinExpr::var(v.q_in[i - 1], 1.0 / vf);
  }
};

// One instance of a logical row for a given speed choice.
struct Candidate {
  LinExpr direct;  // q_in/vf written with the speed's own coefficient
  LinExpr subst;   // q_in/vf replaced by k_in
};

using CandidateList = std::vector<std::optional<Candidate>>;

// Step containing t (t on a step boundary belongs to the earlier step).
int step_of(double t, double T, int n_max) {
  const int p = static_cast<int>(std::ceil(t / T - 1e-9));
  return std::clamp(p, 1, n_max);
}

double stored_vehicles(const LinkGeometry& g, std::span<const double> rho) {
  double s = 0.0;
  for (double r : rho) s += r * g.X;
  return s;
}

// Symbolic value conditions at the two boundaries.
struct Boundaries {
  const LinkVariables& v;
  double T;
  double stored;

  LinExpr gamma(int p, double t) const {
    LinExpr e;
    for (int i = 1; i < p; ++i) e.add(v.q_in[i - 1], T);
    e.add(v.q_in[p - 1], t - (p - 1) * T);
    return e;
  }
  LinExpr beta(int p, double t) const {
    LinExpr e(-stored);
    for (int i = 1; i < p; ++i) e.add(v.q_out[i - 1], T);
    e.add(v.q_out[p - 1], t - (p - 1) * T);
    return e;
  }
  LinExpr cum_in(int n) const {
    LinExpr e;
    for (int i = 1; i <= n; ++i) e.add(v.q_in[i - 1], T);
    return e;
  }
  LinExpr cum_out(int n) const {
    LinExpr e;
    for (int i = 1; i <= n; ++i) e.add(v.q_out[i - 1], T);
    return e;
  }
};

// Every logical compatibility row for one diagram, in a fixed order so that
// entry i refers to the same inequality for every speed choice.
CandidateList compatibility_candidates(const TriangularFD& fd, const LinkGeometry& g,
                                       std::span<const double> rho, const LinkVariables& v,
                                       double T, bool vsl) {
  const int N = v.steps();
  const Boundaries vc{v, T, stored_vehicles(g, rho)};
  const SymbolicFlows direct{v, fd.vf, false};
  const SymbolicFlows subst{v, fd.vf, vsl};
  const double horizon = N * T + kGuardTol;
  CandidateList out;

  auto initial = [&](int k, double t, double x, const LinExpr& rhs) {
    auto c = initial_piece(fd, g, rho, k, t, x);
    if (!c) return out.emplace_back();
    LinExpr e = LinExpr(c->value) - rhs;
    return out.emplace_back(Candidate{e, e});
  };
  auto upstream = [&](int n, double t, double x, const LinExpr& rhs) {
    auto a = upstream_piece(fd, g, T, direct, n, t, x);
    if (!a) return out.emplace_back();
    auto b = upstream_piece(fd, g, T, subst, n, t, x);
    return out.emplace_back(Candidate{a->value - rhs, b->value - rhs});
  };
  auto downstream = [&](int n, double t, double x, const LinExpr& rhs) {
    auto a = downstream_piece(fd, g, T, vc.stored, direct, n, t, x);
    if (!a) return out.emplace_back();
    return out.emplace_back(Candidate{a->value - rhs, a->value - rhs});
  };

  // initial components against the downstream and upstream conditions
  for (int k = 1; k <= g.k_max; ++k) {
    for (int p = 1; p <= N; ++p) initial(k, p * T, g.chi, vc.beta(p, p * T));
    const double t_out = (g.chi - g.boundary(k)) / fd.vf;
    if (t_out <= horizon) {
      initial(k, t_out, g.chi, vc.beta(step_of(t_out, T, N), t_out));
    } else {
      out.emplace_back();
    }
    for (int p = 1; p <= N; ++p) initial(k, p * T, g.xi, vc.gamma(p, p * T));
    const double t_in = (g.xi - g.boundary(k - 1)) / fd.w;
    if (t_in <= horizon) {
      initial(k, t_in, g.xi, vc.gamma(step_of(t_in, T, N), t_in));
    } else {
      out.emplace_back();
    }
  }
  // upstream components
  for (int n = 1; n <= N; ++n) {
    for (int p = 1; p <= N; ++p) upstream(n, p * T, g.xi, vc.gamma(p, p * T));
    for (int p = 1; p <= N; ++p) upstream(n, p * T, g.chi, vc.beta(p, p * T));
    const double t_arr = n * T + g.length() / fd.vf;
    if (t_arr <= horizon) {
      upstream(n, t_arr, g.chi, vc.beta(step_of(t_arr, T, N), t_arr));
    } else {
      out.emplace_back();
    }
  }
  // downstream components
  for (int n = 1; n <= N; ++n) {
    for (int p = 1; p <= N; ++p) downstream(n, p * T, g.xi, vc.gamma(p, p * T));
    const double t_arr = n * T + (g.xi - g.chi) / fd.w;
    if (t_arr <= horizon) {
      downstream(n, t_arr, g.xi, vc.gamma(step_of(t_arr, T, N), t_arr));
    } else {
      out.emplace_back();
    }
    for (int p = 1; p <= N; ++p) downstream(n, p * T, g.chi, vc.beta(p, p * T));
  }
  return out;
}

// Emits one logical row given its instance under each speed choice. When all
// choices agree on the variable part (with q_in/vf written as k_in), a single
// row with the constant written as sum_s delta_s c_s is used; otherwise each choice gets a row that
// is enforced only when its delta is 1.
void emit_logical(RowPool& pool, const LinkSpec& link, const LinkVariables& v,
                  const std::vector<const std::optional<Candidate>*>& per_speed,
                  const std::string& name) {
  if (!link.is_vsl) {
    if (*per_speed[0]) pool.add((*per_speed[0])->direct, name);
    return;
  }
  const int S = link.speed_count();
  bool all = true, none = true;
  for (int s = 0; s < S; ++s) {
    all = all && per_speed[s]->has_value();
    none = none && !per_speed[s]->has_value();
  }
  if (none) return;
  bool uniform = all;
  if (uniform) {
    const auto& ref = **per_speed[0];
    const LinExpr ref_vars = variable_part(ref.subst.normalized());
    for (int s = 1; s < S && uniform; ++s) {
      const auto& c = **per_speed[s];
      uniform = same_terms(variable_part(c.subst.normalized()), ref_vars);
    }
  }
  if (uniform) {
    LinExpr e = variable_part((*per_speed[0])->subst.normalized());
    for (int s = 0; s < S; ++s) e.add(v.delta[s], (*per_speed[s])->subst.normalized().constant());
    pool.add(e, name);
    return;
  }
  for (int s = 0; s < S; ++s) {
    if (*per_speed[s]) pool.add_gated((*per_speed[s])->direct, v.delta[s], fmt::format("{}@{}", name, s));
  }
}

void check_sizes(const LinkSpec& link, const LinkVariables& v, std::span<const double> rho) {
  if (static_cast<int>(rho.size()) != link.geometry.k_max) {
    throw InvalidParameter(fmt::format("link {}: {} initial densities for {} segments", link.id,
                                       rho.size(), link.geometry.k_max));
  }
  for (double r : rho) {
    if (!(r >= -1e-12 && r <= link.fd.rho_m + 1e-12)) {
      throw InvalidParameter(fmt::format("link {}: initial density {} outside [0, rho_m]", link.id, r));
    }
  }
  if (v.steps() < 1 || static_cast<int>(v.q_out.size()) != v.steps()) {
    throw InvalidParameter(fmt::format("link {}: malformed flow variables", link.id));
  }
  if (link.is_vsl && (static_cast<int>(v.delta.size()) != link.speed_count() ||
                      static_cast<int>(v.k_in.size()) != v.steps())) {
    throw InvalidParameter(fmt::format("link {}: missing speed-choice variables", link.id));
  }
}

}  // namespace

RowCounts build_compatibility(LinearProgram& lp, const LinkSpec& link, const LinkVariables& vars,
                              std::span<const double> initial_density) {
  check_sizes(link, vars, initial_density);
  const int S = link.speed_count();
  std::vector<CandidateList> lists;
  for (int s = 0; s < S; ++s) {
    lists.push_back(compatibility_candidates(link.fd_for(s), link.geometry, initial_density, vars,
                                             vars.T, link.is_vsl));
  }
  RowPool pool(lp);
  std::vector<const std::optional<Candidate>*> per_speed(S);
  for (std::size_t i = 0; i < lists[0].size(); ++i) {
    for (int s = 0; s < S; ++s) per_speed[s] = &lists[s][i];
    emit_logical(pool, link, vars, per_speed, fmt::format("{}.compat[{}]", link.id, i));
  }
  return pool.flush();
}

RowCounts build_vsl_linearization(LinearProgram& lp, const LinkSpec& link,
                                  const LinkVariables& vars) {
  if (!link.is_vsl) throw InvalidParameter(fmt::format("link {} has no speed limit", link.id));
  RowCounts counts;
  const auto& set = link.vsl;
  const double q_max = set.q_max();
  LinExpr choice;
  for (int d : vars.delta) choice.add(d, 1.0);
  lp.add_eq(choice, 1.0, fmt::format("{}.one_speed", link.id));
  ++counts.emitted;
  for (int n = 1; n <= vars.steps(); ++n) {
    const int q = vars.q_in[n - 1];
    LinExpr sum;
    for (int s = 0; s < set.size(); ++s) {
      const int k = vars.k_a[s][n - 1];
      const double inv = 1.0 / set.vf[s];
      const auto tag = fmt::format("{}.ka[{}][{}]", link.id, s, n);
      lp.add_le(LinExpr::var(k), LinExpr::var(vars.delta[s], set.Q[s] * inv), tag + ".on");
      lp.add_le(LinExpr::var(k), LinExpr::var(q, inv), tag + ".up");
      lp.add_ge(LinExpr::var(k),
                LinExpr::var(q, inv) - q_max * inv + LinExpr::var(vars.delta[s], q_max * inv),
                tag + ".low");
      counts.emitted += 3;
      sum.add(k, 1.0);
    }
    lp.add_eq(LinExpr::var(vars.k_in[n - 1]), sum, fmt::format("{}.kin[{}]", link.id, n));
    ++counts.emitted;
  }
  return counts;
}

namespace {

// Budgets (vehicles) for the minimum defining D_n or S_n under one speed
// choice: every component c contributes  budget_c - T * var >= 0.
CandidateList bound_candidates(const TriangularFD& fd, const LinkGeometry& g,
                               std::span<const double> rho, const LinkVariables& v, int n,
                               bool demand, int var, bool vsl) {
  const double T = v.T;
  const double t = n * T;
  const Boundaries vc{v, T, stored_vehicles(g, rho)};
  const SymbolicFlows direct{v, fd.vf, false};
  const SymbolicFlows subst{v, fd.vf, vsl};
  const LinExpr used = demand ? vc.cum_out(n - 1) - LinExpr(vc.stored) : vc.cum_in(n - 1);
  const LinExpr slack = used + LinExpr::var(var, T);
  CandidateList out;
  const double x = demand ? g.chi : g.xi;
  for (int k = 1; k <= g.k_max; ++k) {
    auto c = initial_piece(fd, g, rho, k, t, x);
    if (!c) {
      out.emplace_back();
      continue;
    }
    LinExpr e = LinExpr(c->value) - slack;
    out.emplace_back(Candidate{e, e});
  }
  for (int p = 1; p < n; ++p) {
    if (demand) {
      auto a = upstream_piece(fd, g, T, direct, p, t, x);
      auto b = upstream_piece(fd, g, T, subst, p, t, x);
      if (a) out.emplace_back(Candidate{a->value - slack, b->value - slack});
      else out.emplace_back();
    } else {
      auto a = downstream_piece(fd, g, T, vc.stored, direct, p, t, x);
      if (a) out.emplace_back(Candidate{a->value - slack, a->value - slack});
      else out.emplace_back();
    }
  }
  // capacity: Q T - T var >= 0
  LinExpr cap = LinExpr(fd.capacity * T) - LinExpr::var(var, T);
  out.emplace_back(Candidate{cap, cap});
  return out;
}

// Exact minimum: var * T equals the smallest budget. Budgets dominated over
// the variable box are discarded; the rest get a selection binary.
void exact_minimum(LinearProgram& lp, RowPool& pool, LinkVariables& vars,
                   const CandidateList& list, int var, const std::string& name) {
  const double T = vars.T;
  std::vector<LinExpr> budgets;
  for (const auto& c : list) {
    if (c) budgets.push_back((c->direct + LinExpr::var(var, T)).normalized());
  }
  std::vector<bool> keep(budgets.size(), true);
  for (std::size_t a = 0; a < budgets.size(); ++a) {
    for (std::size_t b = 0; b < budgets.size() && keep[a]; ++b) {
      if (a == b || !keep[b]) continue;
      const double diff = min_activity(lp, budgets[a] - budgets[b]);
      // a never below b; ties keep the earlier one
      if (diff > 1e-9 || (diff >= -1e-9 && min_activity(lp, budgets[b] - budgets[a]) >= -1e-9 && b < a))
        keep[a] = false;
    }
  }
  std::vector<std::size_t> live;
  for (std::size_t a = 0; a < budgets.size(); ++a) {
    if (keep[a]) live.push_back(a);
  }
  for (std::size_t a : live) pool.add(budgets[a] - LinExpr::var(var, T), fmt::format("{}.ub{}", name, a));
  if (live.size() == 1) {
    pool.add(LinExpr::var(var, T) - budgets[live[0]], name + ".eq");
    return;
  }
  LinExpr pick;
  for (std::size_t a : live) {
    const int y = lp.add_binary(fmt::format("{}.sel{}", name, a));
    vars.selection.push_back(y);
    pick.add(y, 1.0);
    // T var >= budget - M (1 - y)
    const double big = std::max(0.0, max_activity(lp, budgets[a]));
    pool.add(LinExpr::var(var, T) - budgets[a] + LinExpr(big) - LinExpr::var(y, big),
             fmt::format("{}.lb{}", name, a));
  }
  lp.add_eq(pick, 1.0, name + ".pick");
}

}  // namespace

RowCounts build_demand_supply(LinearProgram& lp, const LinkSpec& link, LinkVariables& vars,
                              std::span<const double> initial_density, BoundMode demand_mode,
                              BoundMode supply_mode) {
  check_sizes(link, vars, initial_density);
  if (link.is_vsl && (demand_mode == BoundMode::exact || supply_mode == BoundMode::exact)) {
    throw InvalidParameter(fmt::format("link {}: exact demand/supply is not available on VSL links", link.id));
  }
  const int N = vars.steps();
  const int S = link.speed_count();
  const double q = link.q_max();
  vars.demand.clear();
  vars.supply.clear();
  for (int n = 1; n <= N; ++n) {
    vars.demand.push_back(lp.add_var(fmt::format("{}.D[{}]", link.id, n), 0.0, q));
    vars.supply.push_back(lp.add_var(fmt::format("{}.S[{}]", link.id, n), 0.0, q));
  }
  RowPool pool(lp);
  for (int side = 0; side < 2; ++side) {
    const bool demand = side == 0;
    const BoundMode mode = demand ? demand_mode : supply_mode;
    for (int n = 1; n <= N; ++n) {
      const int var = demand ? vars.demand[n - 1] : vars.supply[n - 1];
      const auto name = fmt::format("{}.{}[{}]", link.id, demand ? "D" : "S", n);
      std::vector<CandidateList> lists;
      for (int s = 0; s < S; ++s) {
        lists.push_back(bound_candidates(link.fd_for(s), link.geometry, initial_density, vars, n,
                                         demand, var, link.is_vsl));
      }
      if (mode == BoundMode::exact) {
        exact_minimum(lp, pool, vars, lists[0], var, name);
        continue;
      }
      std::vector<const std::optional<Candidate>*> per_speed(S);
      for (std::size_t i = 0; i < lists[0].size(); ++i) {
        for (int s = 0; s < S; ++s) per_speed[s] = &lists[s][i];
        emit_logical(pool, link, vars, per_speed, fmt::format("{}.c{}", name, i));
      }
    }
  }
  return pool.flush();
}

std::vector<double> chain_initial_densities(const LinkGeometry& geom, const TriangularFD& fd,
                                            const ValueConditionSet& vc, double t_boundary) {
  if (t_boundary < 0.0 || t_boundary > vc.steps() * vc.T + kGuardTol) {
    throw InvalidParameter(fmt::format("chaining time {} outside [0, {}]", t_boundary,
                                       vc.steps() * vc.T));
  }
  return segment_densities(vc, fd, geom, t_boundary);
}

double compatibility_violation(const TriangularFD& fd, const LinkGeometry& g,
                               const ValueConditionSet& vc) {
  const int N = vc.steps();
  const double T = vc.T;
  const double stored = vc.stored_vehicles(g);
  const double horizon = N * T + kGuardTol;
  auto gamma = [&](int p, double t) {
    return vc.cumulative_inflow(p - 1) + vc.inflow[p - 1] * (t - (p - 1) * T);
  };
  auto beta = [&](int p, double t) {
    return -stored + vc.cumulative_outflow(p - 1) + vc.outflow[p - 1] * (t - (p - 1) * T);
  };
  double worst = 0.0;
  auto check = [&](MoskowitzValue m, double condition) {
    if (m.is_finite()) worst = std::max(worst, condition - m.value);
  };
  for (int k = 1; k <= g.k_max; ++k) {
    for (int p = 1; p <= N; ++p) {
      check(m_initial(vc, fd, g, k, p * T, g.chi), beta(p, p * T));
      check(m_initial(vc, fd, g, k, p * T, g.xi), gamma(p, p * T));
    }
    const double t_out = (g.chi - g.boundary(k)) / fd.vf;
    if (t_out <= horizon) {
      check(m_initial(vc, fd, g, k, t_out, g.chi), beta(step_of(t_out, T, N), t_out));
    }
    const double t_in = (g.xi - g.boundary(k - 1)) / fd.w;
    if (t_in <= horizon) {
      check(m_initial(vc, fd, g, k, t_in, g.xi), gamma(step_of(t_in, T, N), t_in));
    }
  }
  for (int n = 1; n <= N; ++n) {
    for (int p = 1; p <= N; ++p) {
      check(m_upstream(vc, fd, g, n, p * T, g.xi), gamma(p, p * T));
      check(m_upstream(vc, fd, g, n, p * T, g.chi), beta(p, p * T));
      check(m_downstream(vc, fd, g, n, p * T, g.xi), gamma(p, p * T));
      check(m_downstream(vc, fd, g, n, p * T, g.chi), beta(p, p * T));
    }
    const double t_up = n * T + g.length() / fd.vf;
    if (t_up <= horizon) check(m_upstream(vc, fd, g, n, t_up, g.chi), beta(step_of(t_up, T, N), t_up));
    const double t_down = n * T + (g.xi - g.chi) / fd.w;
    if (t_down <= horizon) {
      check(m_downstream(vc, fd, g, n, t_down, g.xi), gamma(step_of(t_down, T, N), t_down));
    }
  }
  return worst;
}

}  // namespace stochvsl
