#include "stochvsl/lp_model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <stdexcept>

namespace stochvsl {

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  constant_ += o.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  for (const auto& t : o.terms_) terms_.push_back({t.var, -t.coef});
  constant_ -= o.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms_) t.coef *= s;
  constant_ *= s;
  return *this;
}

LinExpr LinExpr::normalized() const {
  LinExpr out;
  out.constant_ = constant_;
  auto sorted = terms_;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Term& a, const Term& b) { return a.var < b.var; });
  for (const auto& t : sorted) {
    if (!out.terms_.empty() && out.terms_.back().var == t.var) {
      out.terms_.back().coef += t.coef;
    } else {
      out.terms_.push_back(t);
    }
  }
  std::erase_if(out.terms_, [](const Term& t) { return t.coef == 0.0; });
  return out;
}

double LinExpr::evaluate(const std::vector<double>& x) const {
  double v = constant_;
  for (const auto& t : terms_) v += t.coef * x.at(t.var);
  return v;
}

bool LinExpr::is_constant() const { return normalized().terms_.empty(); }

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator-(LinExpr a) { return a *= -1.0; }
LinExpr operator*(LinExpr a, double s) { return a *= s; }
LinExpr operator*(double s, LinExpr a) { return a *= s; }

int LinearProgram::add_var(std::string name, double lb, double ub) {
  if (std::isnan(lb) || std::isnan(ub) || lb > ub) {
    throw std::invalid_argument(fmt::format("bad bounds [{}, {}] for {}", lb, ub, name));
  }
  vars_.push_back({std::move(name), VarKind::continuous, lb, ub});
  return num_vars() - 1;
}

int LinearProgram::add_binary(std::string name) {
  vars_.push_back({std::move(name), VarKind::binary, 0.0, 1.0});
  return num_vars() - 1;
}

int LinearProgram::add_row(const LinExpr& lhs, RowSense sense, const LinExpr& rhs,
                           std::string name) {
  const LinExpr e = (lhs - rhs).normalized();
  for (const auto& t : e.terms()) {
    if (t.var < 0 || t.var >= num_vars()) {
      throw std::invalid_argument(fmt::format("row {} references unknown variable {}", name, t.var));
    }
    if (!std::isfinite(t.coef)) {
      throw std::invalid_argument(fmt::format("row {} has a non-finite coefficient", name));
    }
  }
  const double b = -e.constant();
  if (e.terms().empty()) {
    constexpr double tol = 1e-9;
    const bool ok = sense == RowSense::le   ? 0.0 <= b + tol
                    : sense == RowSense::ge ? 0.0 >= b - tol
                                            : std::abs(b) <= tol;
    if (!ok) throw std::invalid_argument(fmt::format("constant row {} is infeasible", name));
    return -1;
  }
  rows_.push_back({std::move(name), e.terms(), sense, b});
  return num_rows() - 1;
}

void LinearProgram::set_objective(const LinExpr& obj, bool maximize) {
  objective_ = obj.normalized();
  maximize_ = maximize;
}

void LinearProgram::add_objective(const LinExpr& obj) {
  objective_ = (objective_ + obj).normalized();
}

int LinearProgram::num_binaries() const {
  return static_cast<int>(std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) {
    return v.kind == VarKind::binary;
  }));
}

double LinearProgram::objective_value(const std::vector<double>& x) const {
  return objective_.evaluate(x);
}

double LinearProgram::row_activity(int row, const std::vector<double>& x) const {
  double a = 0.0;
  for (const auto& t : rows_.at(row).terms) a += t.coef * x.at(t.var);
  return a;
}

double LinearProgram::max_violation(const std::vector<double>& x,
                                    bool include_integrality) const {
  double worst = 0.0;
  for (int j = 0; j < num_vars(); ++j) {
    worst = std::max({worst, vars_[j].lb - x[j], x[j] - vars_[j].ub});
    if (include_integrality && vars_[j].kind == VarKind::binary) {
      worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
    }
  }
  for (int i = 0; i < num_rows(); ++i) {
    const double a = row_activity(i, x);
    const double b = rows_[i].rhs;
    switch (rows_[i].sense) {
      case RowSense::le: worst = std::max(worst, a - b); break;
      case RowSense::ge: worst = std::max(worst, b - a); break;
      case RowSense::eq: worst = std::max(worst, std::abs(a - b)); break;
    }
  }
  return worst;
}

void LinearProgram::validate() const {
  for (const auto& v : vars_) {
    if (std::isnan(v.lb) || std::isnan(v.ub) || v.lb > v.ub) {
      throw std::invalid_argument(fmt::format("variable {} has bad bounds", v.name));
    }
    if (v.kind == VarKind::binary && (v.lb < 0.0 || v.ub > 1.0)) {
      throw std::invalid_argument(fmt::format("binary {} has bounds outside [0, 1]", v.name));
    }
  }
  auto check_terms = [&](const std::vector<Term>& terms, const std::string& where) {
    for (const auto& t : terms) {
      if (t.var < 0 || t.var >= num_vars() || !std::isfinite(t.coef)) {
        throw std::invalid_argument(fmt::format("bad term in {}", where));
      }
    }
  };
  for (const auto& r : rows_) {
    check_terms(r.terms, r.name);
    if (!std::isfinite(r.rhs)) throw std::invalid_argument(fmt::format("row {} rhs", r.name));
  }
  check_terms(objective_.terms(), "objective");
}

}  // namespace stochvsl
