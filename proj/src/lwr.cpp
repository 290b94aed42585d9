#include "stochvsl/lwr.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <numeric>

namespace stochvsl {

double critical_density(double vf, double w, double rho_m) {
  if (!(vf > 0.0) || !(w < 0.0) || !(rho_m > 0.0)) {
    throw InvalidParameter(fmt::format(
        "fundamental diagram needs vf > 0, w < 0, rho_m > 0 (got {}, {}, {})",
        vf, w, rho_m));
  }
  return -rho_m * w / (vf - w);
}

TriangularFD TriangularFD::make(double vf, double w, double rho_m) {
  TriangularFD fd;
  fd.vf = vf;
  fd.w = w;
  fd.rho_m = rho_m;
  fd.rho_c = critical_density(vf, w, rho_m);
  fd.capacity = vf * fd.rho_c;
  return fd;
}

double TriangularFD::flux(double rho) const {
  if (rho < -1e-12 || rho > rho_m + 1e-12) {
    throw std::out_of_range(
        fmt::format("density {} outside [0, {}]", rho, rho_m));
  }
  return std::max(0.0, std::min(vf * rho, w * (rho - rho_m)));
}

bool TriangularFD::consistent(double tol) const {
  if (!(vf > 0.0) || !(w < 0.0) || !(rho_m > 0.0)) return false;
  const double rc = -rho_m * w / (vf - w);
  return std::abs(rc - rho_c) <= tol && std::abs(capacity - vf * rho_c) <= tol &&
         std::abs(capacity - w * (rho_c - rho_m)) <= tol && rho_c > 0.0 &&
         rho_c < rho_m;
}

LinkGeometry LinkGeometry::make(double xi, double segment_length, int k_max,
                                int lanes) {
  if (k_max < 1 || !(segment_length > 0.0) || lanes < 1) {
    throw InvalidParameter(fmt::format(
        "link geometry needs k_max >= 1, X > 0, lanes >= 1 (got {}, {}, {})",
        k_max, segment_length, lanes));
  }
  return LinkGeometry{xi, xi + k_max * segment_length, segment_length, k_max,
                      lanes};
}

int LinkGeometry::segment_of(double x) const {
  const int k = static_cast<int>(std::floor((x - xi) / X)) + 1;
  return std::clamp(k, 1, k_max);
}

double ValueConditionSet::stored_vehicles(const LinkGeometry& geom) const {
  return std::accumulate(initial_density.begin(), initial_density.end(), 0.0) *
         geom.X;
}

double ValueConditionSet::cumulative_inflow(int n) const {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += inflow[i] * T;
  return s;
}

double ValueConditionSet::cumulative_outflow(int n) const {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += outflow[i] * T;
  return s;
}

void ValueConditionSet::validate(const TriangularFD& fd, const LinkGeometry& geom,
                                 double tol) const {
  if (static_cast<int>(initial_density.size()) != geom.k_max) {
    throw InvalidParameter(fmt::format("expected {} initial densities, got {}",
                                       geom.k_max, initial_density.size()));
  }
  if (inflow.size() != outflow.size()) {
    throw InvalidParameter("inflow and outflow sequences differ in length");
  }
  if (!(T > 0.0)) throw InvalidParameter("step size must be positive");
  for (double r : initial_density) {
    if (r < -tol || r > fd.rho_m + tol) {
      throw InvalidParameter(fmt::format("initial density {} outside [0, {}]", r, fd.rho_m));
    }
  }
  for (std::size_t n = 0; n < inflow.size(); ++n) {
    for (double q : {inflow[n], outflow[n]}) {
      if (q < -tol || q > fd.capacity + tol) {
        throw InvalidParameter(
            fmt::format("boundary flow {} at step {} outside [0, {}]", q, n + 1, fd.capacity));
      }
    }
  }
}

std::optional<Piece<double>> initial_piece(const TriangularFD& fd,
                                           const LinkGeometry& geom,
                                           std::span<const double> rho, int k,
                                           double t, double x) {
  const double y = x - geom.xi;
  const double a = (k - 1) * geom.X;
  const double b = k * geom.X;
  if (y < a + t * fd.w - kGuardTol || y > b + fd.vf * t + kGuardTol) {
    return std::nullopt;
  }
  double before = 0.0;
  for (int i = 0; i < k - 1; ++i) before += rho[i] * geom.X;
  const double r = rho[k - 1];
  if (r <= fd.rho_c) {
    if (y >= a + fd.vf * t - kGuardTol) {
      return Piece<double>{Branch::initial_free, -before + r * (t * fd.vf + a - y)};
    }
    return Piece<double>{Branch::initial_fan, -before + fd.rho_c * (t * fd.vf + a - y)};
  }
  if (y <= b + t * fd.w + kGuardTol) {
    return Piece<double>{Branch::initial_congested,
                         -before + r * (t * fd.w + a - y) - fd.rho_m * t * fd.w};
  }
  return Piece<double>{Branch::initial_congested_fan,
                       -before - r * geom.X + fd.rho_c * (t * fd.w + b - y) -
                           fd.rho_m * t * fd.w};
}

namespace {

void check_point(const LinkGeometry& geom, double t, double x) {
  if (t < 0.0 || x < geom.xi - kGuardTol || x > geom.chi + kGuardTol) {
    throw std::out_of_range(fmt::format(
        "point (t={}, x={}) outside [0, inf) x [{}, {}]", t, x, geom.xi, geom.chi));
  }
}

struct Candidate {
  double value;
  double density;
};

// Every finite component at (t, x) with the density of its active branch.
std::vector<Candidate> candidates(const ValueConditionSet& vc,
                                  const TriangularFD& fd,
                                  const LinkGeometry& geom, double t, double x) {
  std::vector<Candidate> out;
  const NumericFlows flows{vc, fd.vf};
  for (int k = 1; k <= geom.k_max; ++k) {
    if (auto p = initial_piece(fd, geom, vc.initial_density, k, t, x)) {
      const bool at_rho_k = p->branch == Branch::initial_free ||
                            p->branch == Branch::initial_congested;
      out.push_back({p->value, at_rho_k ? vc.initial_density[k - 1] : fd.rho_c});
    }
  }
  const double stored = vc.stored_vehicles(geom);
  for (int n = 1; n <= vc.steps(); ++n) {
    if (auto p = upstream_piece(fd, geom, vc.T, flows, n, t, x)) {
      out.push_back({p->value, p->branch == Branch::upstream_transit
                                   ? vc.inflow[n - 1] / fd.vf
                                   : fd.rho_c});
    }
    if (auto p = downstream_piece(fd, geom, vc.T, stored, flows, n, t, x)) {
      out.push_back({p->value, p->branch == Branch::downstream_transit
                                   ? fd.rho_m + vc.outflow[n - 1] / fd.w
                                   : fd.rho_c});
    }
  }
  return out;
}

}  // namespace

MoskowitzValue m_initial(const ValueConditionSet& vc, const TriangularFD& fd,
                         const LinkGeometry& geom, int k, double t, double x) {
  if (k < 1 || k > geom.k_max) throw std::out_of_range("segment index out of range");
  check_point(geom, t, x);
  auto p = initial_piece(fd, geom, vc.initial_density, k, t, x);
  return p ? MoskowitzValue{p->value} : MoskowitzValue{};
}

MoskowitzValue m_upstream(const ValueConditionSet& vc, const TriangularFD& fd,
                          const LinkGeometry& geom, int n, double t, double x) {
  if (n < 1 || n > vc.steps()) throw std::out_of_range("step index out of range");
  check_point(geom, t, x);
  auto p = upstream_piece(fd, geom, vc.T, NumericFlows{vc, fd.vf}, n, t, x);
  return p ? MoskowitzValue{p->value} : MoskowitzValue{};
}

MoskowitzValue m_downstream(const ValueConditionSet& vc, const TriangularFD& fd,
                            const LinkGeometry& geom, int n, double t, double x) {
  if (n < 1 || n > vc.steps()) throw std::out_of_range("step index out of range");
  check_point(geom, t, x);
  auto p = downstream_piece(fd, geom, vc.T, vc.stored_vehicles(geom),
                            NumericFlows{vc, fd.vf}, n, t, x);
  return p ? MoskowitzValue{p->value} : MoskowitzValue{};
}

MoskowitzValue moskowitz(const ValueConditionSet& vc, const TriangularFD& fd,
                         const LinkGeometry& geom, double t, double x) {
  check_point(geom, t, x);
  MoskowitzValue best;
  for (const auto& c : candidates(vc, fd, geom, t, x)) {
    best.value = std::min(best.value, c.value);
  }
  return best;
}

std::vector<double> density_profile(const ValueConditionSet& vc,
                                    const TriangularFD& fd,
                                    const LinkGeometry& geom, double t,
                                    std::span<const double> positions) {
  constexpr double kStep = 1e-6;
  std::vector<double> out;
  out.reserve(positions.size());
  for (double x : positions) {
    check_point(geom, t, x);
    // Probe just downstream so that kinks resolve to the right-hand branch.
    const double probe = x + kStep <= geom.chi ? x + kStep : x;
    const auto cands = candidates(vc, fd, geom, t, probe);
    double best = kInf;
    double rho = 0.0;
    for (const auto& c : cands) {
      if (c.value < best - 1e-12) {
        best = c.value;
        rho = c.density;
      }
    }
    out.push_back(std::clamp(rho, 0.0, fd.rho_m));
  }
  return out;
}

std::vector<double> segment_densities(const ValueConditionSet& vc,
                                      const TriangularFD& fd,
                                      const LinkGeometry& geom, double t) {
  std::vector<double> m(geom.k_max + 1);
  for (int k = 0; k <= geom.k_max; ++k) {
    m[k] = moskowitz(vc, fd, geom, t, geom.boundary(k)).value;
  }
  std::vector<double> rho(geom.k_max);
  for (int k = 0; k < geom.k_max; ++k) {
    rho[k] = std::clamp((m[k] - m[k + 1]) / geom.X, 0.0, fd.rho_m);
  }
  return rho;
}

double link_demand(const ValueConditionSet& vc, const TriangularFD& fd,
                   const LinkGeometry& geom) {
  const int n = vc.steps() + 1;
  const double t = n * vc.T;
  const NumericFlows flows{vc, fd.vf};
  double lowest = kInf;
  for (int k = 1; k <= geom.k_max; ++k) {
    if (auto p = initial_piece(fd, geom, vc.initial_density, k, t, geom.chi)) {
      lowest = std::min(lowest, p->value);
    }
  }
  for (int p = 1; p < n; ++p) {
    if (auto c = upstream_piece(fd, geom, vc.T, flows, p, t, geom.chi)) {
      lowest = std::min(lowest, c->value);
    }
  }
  const double exits = lowest + vc.stored_vehicles(geom) - vc.cumulative_outflow(n - 1);
  return std::clamp(exits / vc.T, 0.0, fd.capacity);
}

double link_supply(const ValueConditionSet& vc, const TriangularFD& fd,
                   const LinkGeometry& geom) {
  const int n = vc.steps() + 1;
  const double t = n * vc.T;
  const NumericFlows flows{vc, fd.vf};
  const double stored = vc.stored_vehicles(geom);
  double lowest = kInf;
  for (int k = 1; k <= geom.k_max; ++k) {
    if (auto p = initial_piece(fd, geom, vc.initial_density, k, t, geom.xi)) {
      lowest = std::min(lowest, p->value);
    }
  }
  for (int p = 1; p < n; ++p) {
    if (auto c = downstream_piece(fd, geom, vc.T, stored, flows, p, t, geom.xi)) {
      lowest = std::min(lowest, c->value);
    }
  }
  const double entries = lowest - vc.cumulative_inflow(n - 1);
  return std::clamp(entries / vc.T, 0.0, fd.capacity);
}

namespace {

// Smallest mean rate (M(t, x) - base) / (t - t0) over t in (t0, t0 + T].
// M restricted to the boundary is concave between the listed breakpoints, so
// the minimum is attained at one of them or at the end of the step.
double step_rate_limit(const ValueConditionSet& vc, const TriangularFD& fd,
                       const LinkGeometry& geom, double x, double base,
                       const std::vector<double>& breakpoints) {
  const double t0 = vc.steps() * vc.T;
  const double t1 = t0 + vc.T;
  double limit = kInf;
  auto consider = [&](double t) {
    if (t <= t0 + 1e-9 || t > t1 + 1e-12) return;
    limit = std::min(limit, (moskowitz(vc, fd, geom, t, x).value - base) / (t - t0));
  };
  consider(t1);
  for (double t : breakpoints) {
    // both sides of a kink
    consider(t - 1e-7);
    consider(t);
  }
  return std::clamp(limit, 0.0, fd.capacity);
}

}  // namespace

double compatible_outflow_limit(const ValueConditionSet& vc, const TriangularFD& fd,
                                const LinkGeometry& geom) {
  const double L = geom.length();
  std::vector<double> bp;
  for (int k = 1; k <= geom.k_max; ++k) {
    const double a = (k - 1) * geom.X;
    const double b = k * geom.X;
    bp.push_back((L - b) / fd.vf);
    bp.push_back((L - a) / fd.vf);
  }
  for (int p = 1; p <= vc.steps(); ++p) {
    bp.push_back((p - 1) * vc.T + L / fd.vf);
    bp.push_back(p * vc.T + L / fd.vf);
  }
  const double base = -vc.stored_vehicles(geom) + vc.cumulative_outflow(vc.steps());
  return step_rate_limit(vc, fd, geom, geom.chi, base, bp);
}

double compatible_inflow_limit(const ValueConditionSet& vc, const TriangularFD& fd,
                               const LinkGeometry& geom) {
  const double L = geom.length();
  const double c = -fd.w;
  std::vector<double> bp;
  for (int k = 1; k <= geom.k_max; ++k) {
    bp.push_back((k - 1) * geom.X / c);
    bp.push_back(k * geom.X / c);
  }
  for (int p = 1; p <= vc.steps(); ++p) {
    bp.push_back((p - 1) * vc.T + L / c);
    bp.push_back(p * vc.T + L / c);
  }
  return step_rate_limit(vc, fd, geom, geom.xi, vc.cumulative_inflow(vc.steps()), bp);
}

double GodunovField::count(int level, double x) const {
  const double y = x - xi;
  double m = cumulative_inflow.at(level);
  const auto& rho = density.at(level);
  for (int i = 0; i < cells(); ++i) {
    const double left = i * dx;
    if (y <= left) break;
    m -= rho[i] * std::min(dx, y - left);
  }
  return m;
}

namespace {

// Mean of a piecewise-constant step sequence over [a, b].
double mean_flow(const std::vector<double>& q, double T, double a, double b) {
  double total = 0.0;
  double t = a;
  while (t < b - 1e-12) {
    const int n = std::min(static_cast<int>(std::floor(t / T + 1e-12)),
                           static_cast<int>(q.size()) - 1);
    const double end = std::min(b, (n + 1) * T);
    total += q[n] * (end - t);
    t = end;
  }
  return total / (b - a);
}

}  // namespace

GodunovField godunov_oracle(const ValueConditionSet& vc, const TriangularFD& fd,
                            const LinkGeometry& geom, double dt, double dx) {
  if (dt > dx / fd.vf * (1.0 + 1e-12) || dt > dx / -fd.w * (1.0 + 1e-12)) {
    throw InvalidParameter(fmt::format("CFL violated: dt={} > dx/vf={}", dt, dx / fd.vf));
  }
  const int cells = static_cast<int>(std::lround(geom.length() / dx));
  if (cells < 1 || std::abs(cells * dx - geom.length()) > 1e-9 * geom.length()) {
    throw InvalidParameter("cell size must divide the link length");
  }
  const double horizon = vc.steps() * vc.T;
  const int levels = static_cast<int>(std::lround(horizon / dt));

  GodunovField field;
  field.dt = dt;
  field.dx = dx;
  field.xi = geom.xi;
  std::vector<double> rho(cells);
  for (int i = 0; i < cells; ++i) {
    const double centre = geom.xi + (i + 0.5) * dx;
    rho[i] = vc.initial_density[geom.segment_of(centre) - 1];
  }
  field.density.push_back(rho);
  field.cumulative_inflow.push_back(0.0);

  std::vector<double> flux(cells + 1);
  for (int s = 0; s < levels; ++s) {
    const double a = s * dt;
    const double b = std::min(horizon, a + dt);
    flux[0] = std::min(mean_flow(vc.inflow, vc.T, a, b), fd.receiving(rho[0]));
    for (int i = 1; i < cells; ++i) {
      flux[i] = std::min(fd.sending(rho[i - 1]), fd.receiving(rho[i]));
    }
    flux[cells] = std::min(mean_flow(vc.outflow, vc.T, a, b), fd.sending(rho[cells - 1]));
    for (int i = 0; i < cells; ++i) {
      rho[i] = std::clamp(rho[i] + dt / dx * (flux[i] - flux[i + 1]), 0.0, fd.rho_m);
    }
    field.density.push_back(rho);
    field.cumulative_inflow.push_back(field.cumulative_inflow.back() + flux[0] * dt);
  }
  return field;
}

}  // namespace stochvsl
