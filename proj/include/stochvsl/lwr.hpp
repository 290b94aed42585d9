#pragma once

// Closed-form Moskowitz (cumulative count) solutions of the LWR model for a
// triangular fundamental diagram with piecewise-affine value conditions.
//
// Conventions: SI units, lane-aggregated densities and flows. The Moskowitz
// function is labelled so that M(0, xi) = 0; vehicles downstream of xi carry
// negative labels and M(t, xi) is the cumulative inflow count.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace stochvsl {

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Absolute tolerance (s, m) for the case guards of the Moskowitz branches.
inline constexpr double kGuardTol = 1e-9;

double critical_density(double vf, double w, double rho_m);

struct TriangularFD {
  double vf{};
  double w{};
  double rho_m{};
  double rho_c{};
  double capacity{};

  /// Builds a diagram with rho_c and capacity derived from (vf, w, rho_m).
  static TriangularFD make(double vf, double w, double rho_m);

  double flux(double rho) const;
  double sending(double rho) const { return vf * std::min(rho, rho_c); }
  double receiving(double rho) const {
    return rho <= rho_c ? capacity : w * (rho - rho_m);
  }
  bool consistent(double tol = 1e-9) const;
};

struct LinkGeometry {
  double xi{};
  double chi{};
  double X{};
  int k_max{1};
  int lanes{1};

  static LinkGeometry make(double xi, double segment_length, int k_max,
                           int lanes = 1);

  double length() const { return chi - xi; }
  /// Position of the downstream end of segment k (k = 0 gives xi).
  double boundary(int k) const { return xi + k * X; }
  int segment_of(double x) const;
};

struct ValueConditionSet {
  std::vector<double> initial_density;  // rho(k), k = 1..k_max
  std::vector<double> inflow;           // q_in(n), n = 1..n_max
  std::vector<double> outflow;          // q_out(n)
  double T{1.0};

  int steps() const { return static_cast<int>(inflow.size()); }
  double stored_vehicles(const LinkGeometry& geom) const;
  double cumulative_inflow(int n) const;   // sum_{i<=n} q_in(i) T
  double cumulative_outflow(int n) const;  // sum_{i<=n} q_out(i) T

  void validate(const TriangularFD& fd, const LinkGeometry& geom,
                double tol = 1e-9) const;
};

/// Extended-real Moskowitz value; +inf marks points outside a component's
/// domain of influence.
struct MoskowitzValue {
  double value{kInf};
  bool is_finite() const { return std::isfinite(value); }
};

enum class Branch : std::uint8_t {
  initial_free,           // rho(k) <= rho_c, characteristic from the segment
  initial_fan,            // rho(k) <= rho_c, rarefaction from the left corner
  initial_congested,      // rho(k) >= rho_c, backward characteristic
  initial_congested_fan,  // rho(k) >= rho_c, fan from the right corner
  upstream_transit,
  upstream_capacity,
  downstream_transit,
  downstream_capacity,
};

template <class Scalar>
struct Piece {
  Branch branch;
  Scalar value;
};

std::optional<Piece<double>> initial_piece(const TriangularFD& fd,
                                           const LinkGeometry& geom,
                                           std::span<const double> rho, int k,
                                           double t, double x);

/// Upstream boundary component for step n. `Flows` supplies in(i), out(i),
/// in_over_vf(i) and zero() in a scalar type that may be symbolic.
template <class Flows>
auto upstream_piece(const TriangularFD& fd, const LinkGeometry& geom, double T,
                    const Flows& f, int n, double t, double x)
    -> std::optional<Piece<typename Flows::Scalar>> {
  using S = typename Flows::Scalar;
  const double y = x - geom.xi;
  const double tau = y / fd.vf;
  if (t < (n - 1) * T + tau - kGuardTol) return std::nullopt;
  S cum = f.zero();
  for (int i = 1; i < n; ++i) cum += f.in(i) * T;
  if (t <= n * T + tau + kGuardTol) {
    return Piece<S>{Branch::upstream_transit,
                    cum + f.in(n) * (t - (n - 1) * T) - f.in_over_vf(n) * y};
  }
  return Piece<S>{Branch::upstream_capacity,
                  cum + f.in(n) * T + (fd.capacity * (t - n * T) - fd.rho_c * y)};
}

/// Downstream boundary component for step n; `stored` is sum rho(k) X.
template <class Flows>
auto downstream_piece(const TriangularFD& fd, const LinkGeometry& geom, double T,
                      double stored, const Flows& f, int n, double t, double x)
    -> std::optional<Piece<typename Flows::Scalar>> {
  using S = typename Flows::Scalar;
  const double z = x - geom.chi;  // <= 0
  const double sigma = z / fd.w;  // >= 0
  if (t < (n - 1) * T + sigma - kGuardTol) return std::nullopt;
  S cum = f.zero();
  for (int i = 1; i < n; ++i) cum += f.out(i) * T;
  if (t <= n * T + sigma + kGuardTol) {
    return Piece<S>{Branch::downstream_transit,
                    cum + f.out(n) * (t - sigma - (n - 1) * T) +
                        (-stored - fd.rho_m * z)};
  }
  return Piece<S>{Branch::downstream_capacity,
                  cum + f.out(n) * T +
                      (-stored + fd.capacity * (t - n * T) - fd.rho_c * z)};
}

/// Numeric flow accessor over a value-condition set.
struct NumericFlows {
  using Scalar = double;
  const ValueConditionSet& vc;
  double vf;
  double zero() const { return 0.0; }
  double in(int i) const { return vc.inflow[i - 1]; }
  double out(int i) const { return vc.outflow[i - 1]; }
  double in_over_vf(int i) const { return vc.inflow[i - 1] / vf; }
};

MoskowitzValue m_initial(const ValueConditionSet& vc, const TriangularFD& fd,
                         const LinkGeometry& geom, int k, double t, double x);
MoskowitzValue m_upstream(const ValueConditionSet& vc, const TriangularFD& fd,
                          const LinkGeometry& geom, int n, double t, double x);
MoskowitzValue m_downstream(const ValueConditionSet& vc, const TriangularFD& fd,
                            const LinkGeometry& geom, int n, double t, double x);

/// Inf-morphism over every component of the value-condition set.
MoskowitzValue moskowitz(const ValueConditionSet& vc, const TriangularFD& fd,
                         const LinkGeometry& geom, double t, double x);

/// -dM/dx of the minimizing branch; at kinks the downstream-side slope wins.
std::vector<double> density_profile(const ValueConditionSet& vc,
                                    const TriangularFD& fd,
                                    const LinkGeometry& geom, double t,
                                    std::span<const double> positions);

/// Exact per-segment mean densities at time t from Moskowitz differences.
std::vector<double> segment_densities(const ValueConditionSet& vc,
                                      const TriangularFD& fd,
                                      const LinkGeometry& geom, double t);

/// Sending flow for the step after the last recorded one, assuming unlimited
/// downstream supply. Bounded by capacity.
double link_demand(const ValueConditionSet& vc, const TriangularFD& fd,
                   const LinkGeometry& geom);

/// Receiving flow for the step after the last recorded one.
double link_supply(const ValueConditionSet& vc, const TriangularFD& fd,
                   const LinkGeometry& geom);

/// Largest constant outflow (inflow) over the next step that keeps the
/// boundary data compatible at every instant of the step. Can be below
/// link_demand (link_supply) when a wave reaches the boundary mid-step.
double compatible_outflow_limit(const ValueConditionSet& vc, const TriangularFD& fd,
                                const LinkGeometry& geom);
double compatible_inflow_limit(const ValueConditionSet& vc, const TriangularFD& fd,
                               const LinkGeometry& geom);

/// First-order Godunov (demand/supply) finite-volume solution used as an
/// independent reference for the closed-form solution.
struct GodunovField {
  double dt{};
  double dx{};
  double xi{};
  std::vector<std::vector<double>> density;  // [time level][cell]
  std::vector<double> cumulative_inflow;     // [time level], vehicles

  int cells() const { return density.empty() ? 0 : static_cast<int>(density.front().size()); }
  int levels() const { return static_cast<int>(density.size()); }
  /// Cumulative count at (level * dt, x) under the same labelling as M.
  double count(int level, double x) const;
};

GodunovField godunov_oracle(const ValueConditionSet& vc, const TriangularFD& fd,
                            const LinkGeometry& geom, double dt, double dx);

}  // namespace stochvsl
