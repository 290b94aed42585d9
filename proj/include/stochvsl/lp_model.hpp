#pragma once

// Solver-agnostic mixed-binary linear program.

#include <string>
#include <vector>

namespace stochvsl {

enum class VarKind { continuous, binary };
enum class RowSense { le, ge, eq };

struct Term {
  int var;
  double coef;
};

/// Affine expression sum(coef * x[var]) + constant.
class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double c) : constant_(c) {}  // NOLINT: implicit on purpose
  static LinExpr var(int id, double coef = 1.0) {
    LinExpr e;
    e.terms_.push_back({id, coef});
    return e;
  }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  LinExpr& add(int id, double coef) {
    terms_.push_back({id, coef});
    return *this;
  }

  const std::vector<Term>& terms() const { return terms_; }
  double constant() const { return constant_; }
  /// Merges duplicate variables and drops exact zeros; sorted by id.
  LinExpr normalized() const;
  double evaluate(const std::vector<double>& x) const;
  bool is_constant() const;

 private:
  std::vector<Term> terms_;
  double constant_{0.0};
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a);
LinExpr operator*(LinExpr a, double s);
LinExpr operator*(double s, LinExpr a);

struct Variable {
  std::string name;
  VarKind kind{VarKind::continuous};
  double lb{0.0};
  double ub{0.0};
};

struct Row {
  std::string name;
  std::vector<Term> terms;  // normalized
  RowSense sense{RowSense::le};
  double rhs{0.0};
};

class LinearProgram {
 public:
  int add_var(std::string name, double lb, double ub);
  int add_binary(std::string name);
  /// Adds lhs (sense) rhs; constants on both sides are moved to the rhs.
  /// Returns the row index, or -1 when the row has no variables (after
  /// checking that the constant relation holds; throws otherwise).
  int add_row(const LinExpr& lhs, RowSense sense, const LinExpr& rhs, std::string name = {});
  int add_le(const LinExpr& lhs, const LinExpr& rhs, std::string name = {}) {
    return add_row(lhs, RowSense::le, rhs, std::move(name));
  }
  int add_ge(const LinExpr& lhs, const LinExpr& rhs, std::string name = {}) {
    return add_row(lhs, RowSense::ge, rhs, std::move(name));
  }
  int add_eq(const LinExpr& lhs, const LinExpr& rhs, std::string name = {}) {
    return add_row(lhs, RowSense::eq, rhs, std::move(name));
  }

  void set_objective(const LinExpr& obj, bool maximize = true);
  void add_objective(const LinExpr& obj);

  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  int num_binaries() const;
  const std::vector<Variable>& vars() const { return vars_; }
  std::vector<Variable>& vars() { return vars_; }
  const std::vector<Row>& rows() const { return rows_; }
  const Variable& var(int i) const { return vars_.at(i); }
  const LinExpr& objective() const { return objective_; }
  bool maximize() const { return maximize_; }

  double objective_value(const std::vector<double>& x) const;
  double row_activity(int row, const std::vector<double>& x) const;
  /// Largest violation of rows, bounds and integrality (binaries) by x.
  double max_violation(const std::vector<double>& x, bool include_integrality = true) const;
  /// Throws std::invalid_argument on dangling ids, bad bounds or non-finite data.
  void validate() const;

  /// Appends a raw, already normalized row (used by importers).
  void push_row(Row row) { rows_.push_back(std::move(row)); }

 private:
  std::vector<Variable> vars_;
  std::vector<Row> rows_;
  LinExpr objective_;
  bool maximize_{true};
};

}  // namespace stochvsl
