#include "dual_simplex.hpp"

#include "stochvsl/milp.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace stochvsl::detail {

namespace {
constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-7;
constexpr double kVirtualBound = 1e7;
constexpr int kRefactorInterval = 64;
constexpr long kMaxResets = 1000;
constexpr double kEtaDrop = 1e-13;
constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr unsigned char kVirtualLower = 1;
constexpr unsigned char kVirtualUpper = 2;
}  // namespace

bool DualSimplex::at_virtual_bound() const {
  for (int j = 0; j < n_ + m_; ++j) {
    if ((state_[j] == State::lower && (boxed_[j] & kVirtualLower)) ||
        (state_[j] == State::upper && (boxed_[j] & kVirtualUpper))) {
      return true;
    }
  }
  return false;
}

DualSimplex::DualSimplex(const LinearProgram& lp)
    : n_(lp.num_vars()), m_(lp.num_rows()), maximize_(lp.maximize()),
      obj_constant_(lp.objective().constant()) {
  std::vector<int> count(n_ + 1, 0);
  for (const auto& row : lp.rows())
    for (const auto& t : row.terms) ++count[t.var + 1];
  col_start_.assign(n_ + 1, 0);
  for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + count[j + 1];
  col_row_.resize(col_start_[n_]);
  col_val_.resize(col_start_[n_]);
  std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
  for (int i = 0; i < m_; ++i) {
    for (const auto& t : lp.rows()[i].terms) {
      col_row_[fill[t.var]] = i;
      col_val_[fill[t.var]++] = t.coef;
    }
  }

  const int total = n_ + m_;
  cost_.assign(total, 0.0);
  for (const auto& t : lp.objective().terms()) cost_[t.var] += maximize_ ? -t.coef : t.coef;
  lb_.resize(total);
  ub_.resize(total);
  boxed_.assign(total, 0);
  for (int j = 0; j < n_; ++j) {
    const auto& v = lp.var(j);
    lb_[j] = v.lb;
    ub_[j] = v.ub;
  }
  for (int i = 0; i < m_; ++i) {
    const auto& row = lp.rows()[i];
    lb_[n_ + i] = row.sense == RowSense::le ? -kInfinity : row.rhs;
    ub_[n_ + i] = row.sense == RowSense::ge ? kInfinity : row.rhs;
  }

  head_.resize(m_);
  pos_.assign(total, -1);
  state_.assign(total, State::lower);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb_[j])) state_[j] = State::lower;
    else if (std::isfinite(ub_[j])) state_[j] = State::upper;
    else state_[j] = State::free;
  }
  for (int i = 0; i < m_; ++i) {
    head_[i] = n_ + i;
    pos_[n_ + i] = i;
    state_[n_ + i] = State::basic;
  }
  dse_ = Eigen::VectorXd::Ones(m_);
  xb_ = Eigen::VectorXd::Zero(m_);
  y_ = Eigen::VectorXd::Zero(m_);
  d_.assign(total, 0.0);
}

void DualSimplex::set_bounds(int j, double lb, double ub) {
  lb_[j] = lb;
  ub_[j] = ub;
  boxed_[j] = 0;
  if (state_[j] == State::lower && !std::isfinite(lb)) state_[j] = State::upper;
  if (state_[j] == State::upper && !std::isfinite(ub)) state_[j] = State::lower;
}

double DualSimplex::value_of(int j) const {
  switch (state_[j]) {
    case State::basic: return xb_[pos_[j]];
    case State::lower: return lb_[j];
    case State::upper: return ub_[j];
    case State::free: return 0.0;
  }
  return 0.0;
}

double DualSimplex::column_dot(int j, const double* row) const {
  if (j >= n_) return -row[j - n_];
  double s = 0.0;
  for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) s += col_val_[p] * row[col_row_[p]];
  return s;
}

void DualSimplex::load_column(int j, Eigen::VectorXd& x) const {
  x.setZero(m_);
  if (j >= n_) {
    x[j - n_] = -1.0;
    return;
  }
  for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) x[col_row_[p]] = col_val_[p];
}

void DualSimplex::ftran(Eigen::VectorXd& x) const {
  if (lu_) x = lu_->solve(x).eval();
  else x = -x;
  for (const auto& e : etas_) {
    const double xr = x[e.r] / e.pivot;
    x[e.r] = xr;
    if (xr == 0.0) continue;
    for (const auto& [i, v] : e.entries) x[i] -= v * xr;
  }
}

void DualSimplex::btran(Eigen::VectorXd& x) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = x[it->r];
    for (const auto& [i, v] : it->entries) s -= v * x[i];
    x[it->r] = s / it->pivot;
  }
  if (lu_) x = lu_->transpose().solve(x).eval();
  else x = -x;
}

void DualSimplex::refactor() {
  etas_.clear();
  since_refactor_ = 0;
  bool slack_only = true;
  for (int r = 0; r < m_; ++r) slack_only = slack_only && head_[r] == n_ + r;
  if (slack_only) {
    lu_.reset();
    return;
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int r = 0; r < m_; ++r) {
    const int j = head_[r];
    if (j >= n_) {
      trip.emplace_back(j - n_, r, -1.0);
    } else {
      for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) trip.emplace_back(col_row_[p], r, col_val_[p]);
    }
  }
  Eigen::SparseMatrix<double> b(m_, m_);
  b.setFromTriplets(trip.begin(), trip.end());
  b.makeCompressed();
  lu_ = std::make_unique<Factor>();
  lu_->compute(b);
  if (lu_->info() != Eigen::Success) reset_to_slack_basis();
}

// Recovery from a numerically singular basis: every row slack basic, every
// structural at a bound. Dual feasibility is restored on the next iteration.
void DualSimplex::reset_to_slack_basis() {
  ++resets_;
  if (resets_ > kMaxResets) throw NumericalFailure("basis factorization failed repeatedly");
  lu_.reset();
  etas_.clear();
  since_refactor_ = 0;
  for (int j = 0; j < n_ + m_; ++j) {
    if (boxed_[j] & kVirtualLower) lb_[j] = -kInfinity;
    if (boxed_[j] & kVirtualUpper) ub_[j] = kInfinity;
    boxed_[j] = 0;
  }
  for (int j = 0; j < n_; ++j) {
    pos_[j] = -1;
    if (std::isfinite(lb_[j])) state_[j] = State::lower;
    else if (std::isfinite(ub_[j])) state_[j] = State::upper;
    else state_[j] = State::free;
  }
  for (int i = 0; i < m_; ++i) {
    head_[i] = n_ + i;
    pos_[n_ + i] = i;
    state_[n_ + i] = State::basic;
  }
  dse_ = Eigen::VectorXd::Ones(m_);
}

void DualSimplex::compute_primal() {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (int j = 0; j < n_ + m_; ++j) {
    if (state_[j] == State::basic) continue;
    const double v = value_of(j);
    if (v == 0.0) continue;
    if (j >= n_) {
      rhs[j - n_] += v;
    } else {
      for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) rhs[col_row_[p]] -= col_val_[p] * v;
    }
  }
  ftran(rhs);
  xb_ = std::move(rhs);
}

void DualSimplex::compute_duals() {
  Eigen::VectorXd cb(m_);
  for (int r = 0; r < m_; ++r) cb[r] = cost_[head_[r]];
  btran(cb);
  y_ = std::move(cb);
  for (int j = 0; j < n_ + m_; ++j) {
    d_[j] = state_[j] == State::basic ? 0.0 : cost_[j] - column_dot(j, y_.data());
  }
}

bool DualSimplex::fix_dual_infeasibility() {
  bool changed = false;
  for (int j = 0; j < n_ + m_; ++j) {
    const State s = state_[j];
    if (s == State::basic || lb_[j] == ub_[j]) continue;
    const double d = d_[j];
    if ((s == State::lower || s == State::free) && d < -kDualTol) {
      if (!std::isfinite(ub_[j])) {
        ub_[j] = (std::isfinite(lb_[j]) ? lb_[j] : 0.0) + kVirtualBound;
        boxed_[j] |= kVirtualUpper;
      }
      state_[j] = State::upper;
      changed = true;
    } else if ((s == State::upper || s == State::free) && d > kDualTol) {
      if (!std::isfinite(lb_[j])) {
        lb_[j] = (std::isfinite(ub_[j]) ? ub_[j] : 0.0) - kVirtualBound;
        boxed_[j] |= kVirtualLower;
      }
      state_[j] = State::lower;
      changed = true;
    }
  }
  return changed;
}

void DualSimplex::pivot(int r, int q, const Eigen::VectorXd& w, const Eigen::VectorXd& rho,
                        bool leave_to_lower) {
  const int leaving = head_[r];
  // dual steepest-edge weights for the new basis
  Eigen::VectorXd tau = rho;
  ftran(tau);
  const double beta_r = rho.squaredNorm();
  const double wr = w[r];
  for (int i = 0; i < m_; ++i) {
    if (i == r || w[i] == 0.0) continue;
    const double ratio = w[i] / wr;
    dse_[i] = std::max(dse_[i] - 2.0 * ratio * tau[i] + ratio * ratio * beta_r, 1e-10);
  }
  dse_[r] = std::max(beta_r / (wr * wr), 1e-10);

  Eta eta{r, wr, {}};
  for (int i = 0; i < m_; ++i)
    if (i != r && std::abs(w[i]) > kEtaDrop) eta.entries.emplace_back(i, w[i]);
  etas_.push_back(std::move(eta));

  state_[leaving] = leave_to_lower ? State::lower : State::upper;
  pos_[leaving] = -1;
  head_[r] = q;
  pos_[q] = r;
  state_[q] = State::basic;
  ++since_refactor_;
}

DualSimplex::Result DualSimplex::solve(long max_iterations) {
  if (m_ == 0) {
    compute_duals();
    fix_dual_infeasibility();
    return at_virtual_bound() ? Result::unbounded : Result::optimal;
  }
  if (since_refactor_ >= kRefactorInterval) refactor();
  Eigen::VectorXd w(m_);
  const long start = iterations_;
  for (;;) {
    if (iterations_ - start >= max_iterations) return Result::iteration_limit;
    compute_duals();
    fix_dual_infeasibility();
    compute_primal();

    int r = -1;
    double best = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int k = head_[i];
      const double v = xb_[i];
      double infeas = 0.0;
      if (v < lb_[k] - kPrimalTol) infeas = lb_[k] - v;
      else if (v > ub_[k] + kPrimalTol) infeas = v - ub_[k];
      if (infeas <= 0.0) continue;
      const double score = infeas * infeas / dse_[i];
      if (score > best) {
        best = score;
        r = i;
      }
    }
    if (r < 0) {
      return at_virtual_bound() ? Result::unbounded : Result::optimal;
    }

    const int leaving = head_[r];
    const bool to_lower = xb_[r] < lb_[leaving];
    Eigen::VectorXd rho_row = Eigen::VectorXd::Unit(m_, r);
    btran(rho_row);
    const double* rho = rho_row.data();

    // Harris two-pass ratio test
    double theta_max = kInfinity;
    std::vector<std::pair<int, double>> eligible;
    for (int j = 0; j < n_ + m_; ++j) {
      const State s = state_[j];
      if (s == State::basic || lb_[j] == ub_[j]) continue;
      const double alpha = column_dot(j, rho);
      if (std::abs(alpha) < kPivotTol) continue;
      bool ok;
      if (s == State::free) ok = true;
      else if (to_lower) ok = (s == State::lower) ? alpha < 0.0 : alpha > 0.0;
      else ok = (s == State::lower) ? alpha > 0.0 : alpha < 0.0;
      if (!ok) continue;
      eligible.emplace_back(j, alpha);
      theta_max = std::min(theta_max, (std::abs(d_[j]) + kDualTol) / std::abs(alpha));
    }
    if (eligible.empty()) return Result::infeasible;
    int q = -1;
    double alpha_q = 0.0;
    for (const auto& [j, alpha] : eligible) {
      if (std::abs(d_[j]) / std::abs(alpha) <= theta_max && std::abs(alpha) > std::abs(alpha_q)) {
        alpha_q = alpha;
        q = j;
      }
    }
    load_column(q, w);
    ftran(w);
    // row and column computations of the pivot must agree
    if (std::abs(w[r]) < kPivotTol || std::abs(w[r] - alpha_q) > 1e-6 * (1.0 + std::abs(w[r]))) {
      ++iterations_;
      if (since_refactor_ > 0) {
        refactor();
        continue;
      }
      if (std::abs(w[r]) < kPivotTol) {
        reset_to_slack_basis();
        continue;
      }
    }
    pivot(r, q, w, rho_row, to_lower);
    ++iterations_;
    if (since_refactor_ >= kRefactorInterval) refactor();
  }
}

std::vector<double> DualSimplex::values() const {
  std::vector<double> x(n_);
  for (int j = 0; j < n_; ++j) {
    x[j] = value_of(j);
    // basic values sit inside their bounds up to round-off
    if (state_[j] == State::basic) {
      if (x[j] < lb_[j] && x[j] > lb_[j] - kPrimalTol) x[j] = lb_[j];
      if (x[j] > ub_[j] && x[j] < ub_[j] + kPrimalTol) x[j] = ub_[j];
    }
  }
  return x;
}

double DualSimplex::objective() const {
  double v = 0.0;
  for (int j = 0; j < n_; ++j) v += cost_[j] * value_of(j);
  return (maximize_ ? -v : v) + obj_constant_;
}

}  // namespace stochvsl::detail
