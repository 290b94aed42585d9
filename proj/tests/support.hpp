#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "stochvsl/lwr.hpp"

namespace testsupport {

using namespace stochvsl;

inline stochvsl::TriangularFD case_fd(double vf = 30.0) {
  return stochvsl::TriangularFD::make(vf, -4.9, 0.5);
}

// Value conditions built step by step so that each boundary flow stays
// within the in-step demand/supply of the closed-form solution (hence
// compatible).
inline stochvsl::ValueConditionSet random_compatible_vc(
    std::mt19937_64& rng, const stochvsl::TriangularFD& fd,
    const stochvsl::LinkGeometry& geom, int steps, double T) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  stochvsl::ValueConditionSet vc;
  vc.T = T;
  for (int k = 0; k < geom.k_max; ++k) {
    vc.initial_density.push_back(u(rng) < 0.5 ? u(rng) * fd.rho_c
                                              : fd.rho_c + u(rng) * (fd.rho_m - fd.rho_c));
  }
  for (int n = 0; n < steps; ++n) {
    const double d = stochvsl::compatible_outflow_limit(vc, fd, geom);
    const double s = stochvsl::compatible_inflow_limit(vc, fd, geom);
    vc.inflow.push_back(s * (0.3 + 0.7 * u(rng)));
    vc.outflow.push_back(d * (0.2 + 0.8 * u(rng)));
  }
  return vc;
}

// Closed form vs the Godunov oracle at dx = X / refine, dt = dx / vf, at
// every step end: mean absolute count error and the largest cell-average
// density error away from shocks.
struct OracleError {
  double count;
  double density;
};

inline OracleError compare_with_godunov(const ValueConditionSet& vc, const TriangularFD& fd,
                                        const LinkGeometry& g, int refine) {
  const double dx = g.X / refine;
  const double dt = dx / fd.vf;
  const auto field = godunov_oracle(vc, fd, g, dt, dx);
  const int per_step = static_cast<int>(std::lround(vc.T / dt));
  OracleError err{0, 0};
  for (int n = 1; n <= vc.steps(); ++n) {
    const int level = n * per_step;
    const double t = n * vc.T;
    const int cells = field.cells();
    std::vector<double> mids(cells), avg(cells);
    for (int i = 0; i < cells; ++i) {
      const double left = g.xi + i * dx;
      mids[i] = left + 0.5 * dx;
      avg[i] = (moskowitz(vc, fd, g, t, left).value -
                moskowitz(vc, fd, g, t, left + dx).value) / dx;
    }
    // mean absolute count error on a grid shared by every refinement
    for (int j = 0; j <= 64; ++j) {
      const double x = g.xi + g.length() * j / 64.0;
      err.count += std::abs(field.count(level, x) - moskowitz(vc, fd, g, t, x).value) /
                   (65.0 * vc.steps());
    }
    const auto centre = density_profile(vc, fd, g, t, mids);
    std::vector<bool> shock(cells, false);
    for (int i = 0; i < cells; ++i) {
      bool jump = std::abs(avg[i] - centre[i]) > 1e-6 * fd.rho_m;
      if (i + 1 < cells) jump = jump || std::abs(centre[i + 1] - centre[i]) > 0.05 * fd.rho_m;
      if (jump) {
        for (int j = std::max(0, i - 2); j <= std::min(cells - 1, i + 3); ++j) shock[j] = true;
      }
    }
    for (int i = 0; i < cells; ++i) {
      if (!shock[i]) err.density = std::max(err.density, std::abs(field.density[level][i] - avg[i]));
    }
  }
  return err;
}


}  // namespace testsupport
