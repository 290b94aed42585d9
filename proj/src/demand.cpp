#include "stochvsl/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

#include "stochvsl/lwr.hpp"

namespace stochvsl {

DemandDistribution DemandDistribution::symmetric(double p, double low, double mid, double high) {
  if (!(p >= 0.0 && p <= 0.5)) throw InvalidParameter(fmt::format("symmetric weight {} outside [0, 0.5]", p));
  return {{low, mid, high}, {p, 1.0 - 2.0 * p, p}};
}

double DemandDistribution::mean() const {
  double m = 0.0;
  for (int j = 0; j < size(); ++j) m += probabilities[j] * levels[j];
  return m;
}

double DemandDistribution::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (int j = 0; j < size(); ++j)
    if (probabilities[j] > 0.0) m = std::min(m, levels[j]);
  return m;
}

double DemandDistribution::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < size(); ++j)
    if (probabilities[j] > 0.0) m = std::max(m, levels[j]);
  return m;
}

double DemandDistribution::stddev() const {
  const double m = mean();
  double v = 0.0;
  for (int j = 0; j < size(); ++j) v += probabilities[j] * (levels[j] - m) * (levels[j] - m);
  return std::sqrt(v);
}

bool DemandDistribution::contains(double level, double tol) const {
  return std::any_of(levels.begin(), levels.end(), [&](double l) { return std::abs(l - level) <= tol; });
}

void DemandDistribution::validate() const {
  if (levels.empty() || levels.size() != probabilities.size()) {
    throw InvalidParameter(fmt::format("demand distribution needs matching non-empty lists ({} levels, {} probabilities)",
                                       levels.size(), probabilities.size()));
  }
  double sum = 0.0;
  for (int j = 0; j < size(); ++j) {
    if (!(probabilities[j] >= 0.0)) throw InvalidParameter("negative scenario probability");
    if (!(levels[j] >= 0.0)) throw InvalidParameter("negative demand level");
    sum += probabilities[j];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameter(fmt::format("probabilities sum to {}", sum));
}

std::vector<std::vector<double>> init_demand_matrix(const DemandDistribution& dist, int steps) {
  dist.validate();
  std::vector<std::vector<double>> m;
  for (double level : dist.levels) m.emplace_back(steps, level);
  return m;
}

QueueUpdate apply_queue_update(std::vector<double> column, double backlog, double capacity) {
  if (!(backlog >= 0.0)) throw InvalidParameter(fmt::format("negative backlog {}", backlog));
  double e = backlog;
  for (double& d : column) {
    if (e <= 0.0) break;
    const double room = std::max(0.0, capacity - d);
    const double add = std::min(room, e);
    d += add;
    e -= add;
  }
  return {std::move(column), e};
}

std::vector<QueueUpdate> scenario_demands(const DemandDistribution& dist, int steps,
                                          double backlog, double capacity) {
  std::vector<QueueUpdate> out;
  for (auto& column : init_demand_matrix(dist, steps)) {
    out.push_back(apply_queue_update(std::move(column), backlog, capacity));
  }
  return out;
}

std::vector<double> observed_demand_vector(double observed, double tail, int steps,
                                           int rolling_steps) {
  if (rolling_steps < 0 || rolling_steps > steps) {
    throw InvalidParameter(fmt::format("rolling horizon {} outside [0, {}]", rolling_steps, steps));
  }
  std::vector<double> v(steps, tail);
  std::fill(v.begin(), v.begin() + (steps - rolling_steps), observed);
  return v;
}

RealizedInflow compute_realized_inflow(const std::vector<double>& control,
                                       const std::vector<double>& demand, double backlog) {
  if (control.size() != demand.size()) throw InvalidParameter("control and demand lengths differ");
  if (!(backlog >= 0.0)) throw InvalidParameter(fmt::format("negative backlog {}", backlog));
  RealizedInflow r;
  double waiting = backlog;
  for (std::size_t t = 0; t < control.size(); ++t) {
    if (control[t] < 0.0 || demand[t] < 0.0) throw InvalidParameter("negative control or demand");
    waiting += demand[t];
    const double q = std::min(control[t], waiting);
    r.inflow.push_back(q);
    waiting = std::max(0.0, waiting - q);
  }
  r.queue = waiting;
  return r;
}

}  // namespace stochvsl
