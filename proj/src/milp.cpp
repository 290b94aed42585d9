#include "stochvsl/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "dual_simplex.hpp"

namespace stochvsl {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::gap_limit: return "gap_limit";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::node_limit: return "node_limit";
    case SolveStatus::time_limit: return "time_limit";
  }
  return "unknown";
}

double Solution::gap() const {
  if (!has_solution()) return std::numeric_limits<double>::infinity();
  return std::abs(bound - objective) / std::max(1.0, std::abs(objective));
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr long kLpIterationLimit = 500'000;

void check_lp_result(detail::DualSimplex::Result r, long nodes) {
  if (r == detail::DualSimplex::Result::iteration_limit) {
    throw NumericalFailure(fmt::format(
        "dual simplex hit the iteration limit ({}) at node {}", kLpIterationLimit, nodes));
  }
}

// Re-solves with every binary fixed to its rounded value so the returned
// point satisfies the rows with the exact 0/1 values.
std::vector<double> polish(const LinearProgram& lp, const std::vector<double>& x) {
  LinearProgram fixed = lp;
  for (int j = 0; j < fixed.num_vars(); ++j) {
    auto& v = fixed.vars()[j];
    if (v.kind == VarKind::binary) v.lb = v.ub = std::round(x[j]);
  }
  detail::DualSimplex s(fixed);
  if (s.solve(kLpIterationLimit) != detail::DualSimplex::Result::optimal) return {};
  auto y = s.values();
  for (int j = 0; j < lp.num_vars(); ++j)
    if (lp.var(j).kind == VarKind::binary) y[j] = std::round(x[j]);
  return y;
}

}  // namespace

Solution solve_lp_relaxation(const LinearProgram& lp, const SolveOptions& opts) {
  lp.validate();
  const auto start = Clock::now();
  detail::DualSimplex s(lp);
  const auto r = s.solve(kLpIterationLimit);
  check_lp_result(r, 0);
  Solution sol;
  sol.lp_iterations = s.iterations();
  sol.seconds = elapsed(start);
  if (r == detail::DualSimplex::Result::infeasible) {
    sol.status = SolveStatus::infeasible;
    return sol;
  }
  if (r == detail::DualSimplex::Result::unbounded) {
    sol.status = SolveStatus::unbounded;
    return sol;
  }
  sol.status = SolveStatus::optimal;
  sol.x = s.values();
  sol.objective = sol.bound = sol.root_relaxation = s.objective();
  const double viol = lp.max_violation(sol.x, false);
  if (viol > opts.feasibility_tol) {
    throw NumericalFailure(fmt::format("relaxation solution violates the model by {}", viol));
  }
  return sol;
}

namespace {

constexpr int kReliable = 2;          // observations before a pseudocost is trusted
constexpr int kMaxStrongPerNode = 8;
constexpr long kStrongIterations = 80;

// Per-variable average objective loss per unit of rounding, both directions.
struct Pseudocosts {
  std::vector<double> sum[2];
  std::vector<int> count[2];

  explicit Pseudocosts(int n) {
    for (int d = 0; d < 2; ++d) {
      sum[d].assign(n, 0.0);
      count[d].assign(n, 0);
    }
  }
  void record(int j, int dir, double loss, double frac) {
    if (frac < 1e-9 || !std::isfinite(loss)) return;
    sum[dir][j] += std::max(0.0, loss) / frac;
    ++count[dir][j];
  }
  double average(int dir) const {
    double s = 0.0;
    int c = 0;
    for (std::size_t j = 0; j < sum[dir].size(); ++j) {
      if (count[dir][j] > 0) {
        s += sum[dir][j] / count[dir][j];
        ++c;
      }
    }
    return c > 0 ? s / c : 1.0;
  }
  double estimate(int j, int dir, double fallback) const {
    return count[dir][j] > 0 ? sum[dir][j] / count[dir][j] : fallback;
  }
};

double score(double down, double up) {
  return std::max(down, 1e-6) * std::max(up, 1e-6);
}

}  // namespace

Solution branch_and_bound(const LinearProgram& lp, const SolveOptions& opts) {
  lp.validate();
  const auto start = Clock::now();
  const double sense = lp.maximize() ? 1.0 : -1.0;
  const int n = lp.num_vars();

  std::vector<int> binaries;
  for (int j = 0; j < n; ++j)
    if (lp.var(j).kind == VarKind::binary) binaries.push_back(j);
  std::vector<double> hint(n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [j, v] : opts.hint)
    if (j >= 0 && j < n) hint[j] = v;

  struct Node {
    std::vector<std::pair<int, double>> fixings;
    double bound;  // parent relaxation, in the maximization orientation
    long order;
    int var{-1};   // last branching variable
    int dir{0};    // 0 down, 1 up
    double frac{0.0};
  };

  detail::DualSimplex simplex(lp);
  Pseudocosts pc(n);
  Solution sol;
  std::vector<Node> open;
  long created = 0;
  double incumbent = -std::numeric_limits<double>::infinity();
  double pruned_bound = -std::numeric_limits<double>::infinity();
  bool hit_limit = false;
  SolveStatus limit_status = SolveStatus::node_limit;

  auto tolerance = [&] { return opts.relative_gap * std::max(1.0, std::abs(incumbent)); };
  auto apply = [&](const Node& node) {
    for (int j : binaries) simplex.set_bounds(j, lp.var(j).lb, lp.var(j).ub);
    for (const auto& [j, v] : node.fixings) simplex.set_bounds(j, v, v);
  };
  // Records a node that is discarded because of the gap tolerance.
  auto prune = [&](double bound) {
    if (bound > incumbent + 1e-9 * std::max(1.0, std::abs(incumbent))) {
      pruned_bound = std::max(pruned_bound, bound);
    }
  };
  // Objective loss of fixing j to `to`, from a few dual simplex pivots. The
  // simplex stays dual feasible, so a truncated solve still bounds the child.
  auto probe = [&](int j, double to, double value) {
    const double lo = simplex.lower(j), hi = simplex.upper(j);
    simplex.set_bounds(j, to, to);
    const auto r = simplex.solve(kStrongIterations);
    simplex.set_bounds(j, lo, hi);
    if (r == detail::DualSimplex::Result::infeasible) return std::numeric_limits<double>::infinity();
    if (r == detail::DualSimplex::Result::unbounded) return 0.0;
    return std::max(0.0, value - sense * simplex.objective());
  };
  // Reliability branching: pseudocosts, initialized by strong branching.
  auto select = [&](const std::vector<double>& x, double value) {
    std::vector<std::pair<double, int>> cand;  // (fractionality, var)
    for (int j : binaries) {
      const double f = std::min(x[j] - std::floor(x[j]), std::ceil(x[j]) - x[j]);
      if (f > opts.integrality_tol + 1e-12) cand.emplace_back(f, j);
    }
    if (cand.empty()) return -1;
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const double avg_down = pc.average(0), avg_up = pc.average(1);
    int best = -1, strong = 0;
    double best_score = -1.0;
    for (const auto& [f, j] : cand) {
      const double fd = x[j] - std::floor(x[j]), fu = std::ceil(x[j]) - x[j];
      double down, up;
      const bool reliable = pc.count[0][j] >= kReliable && pc.count[1][j] >= kReliable;
      if (!reliable && strong < kMaxStrongPerNode) {
        ++strong;
        down = probe(j, std::floor(x[j]), value);
        up = probe(j, std::ceil(x[j]), value);
        pc.record(j, 0, down, fd);
        pc.record(j, 1, up, fu);
      } else {
        down = fd * pc.estimate(j, 0, avg_down);
        up = fu * pc.estimate(j, 1, avg_up);
      }
      const double sc = score(down, up);
      if (sc > best_score) {
        best_score = sc;
        best = j;
      }
      if (std::isinf(sc)) break;
    }
    return best;
  };

  Node current{{}, std::numeric_limits<double>::infinity(), created++};
  bool have_current = true;
  bool first_dive = true;
  while (have_current) {
    if (sol.nodes >= opts.node_limit) {
      hit_limit = true;
      limit_status = SolveStatus::node_limit;
      open.push_back(current);
      break;
    }
    if (elapsed(start) > opts.time_limit) {
      hit_limit = true;
      limit_status = SolveStatus::time_limit;
      open.push_back(current);
      break;
    }
    apply(current);
    const auto r = simplex.solve(kLpIterationLimit);
    ++sol.nodes;
    check_lp_result(r, sol.nodes);
    if (r == detail::DualSimplex::Result::unbounded) {
      sol.status = SolveStatus::unbounded;
      sol.lp_iterations = simplex.iterations();
      sol.seconds = elapsed(start);
      return sol;
    }

    bool descend = false;
    if (r == detail::DualSimplex::Result::optimal) {
      const double value = sense * simplex.objective();
      if (sol.nodes == 1) sol.root_relaxation = simplex.objective();
      if (current.var >= 0) pc.record(current.var, current.dir, current.bound - value, current.frac);
      if (value <= incumbent + tolerance()) {
        prune(value);
      } else {
        const auto x = simplex.values();
        const int branch = select(x, value);
        if (branch < 0) {
          auto candidate = x;
          for (int j : binaries) candidate[j] = std::round(candidate[j]);
          if (lp.max_violation(candidate) > opts.feasibility_tol) candidate = polish(lp, x);
          if (!candidate.empty() && lp.max_violation(candidate) <= opts.feasibility_tol) {
            const double obj = sense * lp.objective_value(candidate);
            if (obj > incumbent) {
              incumbent = obj;
              sol.x = std::move(candidate);
            }
          }
        } else {
          const double xb = x[branch];
          double first = xb >= 0.5 ? 1.0 : 0.0;
          if (first_dive && !std::isnan(hint[branch])) first = std::round(hint[branch]);
          const auto frac_of = [&](double to) { return to > 0.5 ? std::ceil(xb) - xb : xb - std::floor(xb); };
          Node other{current.fixings, value, created++, branch, first > 0.5 ? 0 : 1, frac_of(1.0 - first)};
          other.fixings.emplace_back(branch, 1.0 - first);
          open.push_back(std::move(other));
          current.fixings.emplace_back(branch, first);
          current.bound = value;
          current.order = created++;
          current.var = branch;
          current.dir = first > 0.5 ? 1 : 0;
          current.frac = frac_of(first);
          descend = true;
        }
      }
    }
    if (descend) continue;

    first_dive = false;
    // best-bound restart
    std::erase_if(open, [&](const Node& nd) {
      if (nd.bound <= incumbent + tolerance()) {
        prune(nd.bound);
        return true;
      }
      return false;
    });
    if (open.empty()) {
      have_current = false;
      break;
    }
    auto best = std::min_element(open.begin(), open.end(), [](const Node& a, const Node& b) {
      return a.bound != b.bound ? a.bound > b.bound : a.order < b.order;
    });
    current = std::move(*best);
    open.erase(best);
  }

  sol.lp_iterations = simplex.iterations();
  sol.seconds = elapsed(start);
  if (!sol.has_solution()) {
    sol.status = hit_limit ? limit_status : SolveStatus::infeasible;
    return sol;
  }
  sol.objective = lp.objective_value(sol.x);
  double bound = std::max(incumbent, pruned_bound);
  for (const auto& nd : open) bound = std::max(bound, nd.bound);
  sol.bound = sense * bound;
  if (hit_limit) sol.status = limit_status;
  else sol.status = pruned_bound > incumbent ? SolveStatus::gap_limit : SolveStatus::optimal;
  return sol;
}

}  // namespace stochvsl
