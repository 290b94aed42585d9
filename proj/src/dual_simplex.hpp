#pragma once

// Bounded dual simplex on  A x - r = 0,  l <= (x, r) <= u. The basis is kept
// as a sparse LU factorization plus product-form eta updates; rows are priced
// by dual steepest edge. Internal to the solver.

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <memory>
#include <vector>

#include "stochvsl/lp_model.hpp"

namespace stochvsl::detail {

class DualSimplex {
 public:
  enum class Result { optimal, infeasible, unbounded, iteration_limit };

  explicit DualSimplex(const LinearProgram& lp);

  int structurals() const { return n_; }
  void set_bounds(int j, double lb, double ub);
  double lower(int j) const { return lb_[j]; }
  double upper(int j) const { return ub_[j]; }

  Result solve(long max_iterations = 200'000);

  /// Structural values of the last solve.
  std::vector<double> values() const;
  /// Objective in the model's own sense, including its constant.
  double objective() const;
  long iterations() const { return iterations_; }

 private:
  enum class State : unsigned char { basic, lower, upper, free };

  double value_of(int j) const;
  void refactor();
  void reset_to_slack_basis();
  void compute_primal();
  void compute_duals();
  bool fix_dual_infeasibility();
  bool at_virtual_bound() const;
  void pivot(int r, int q, const Eigen::VectorXd& w, const Eigen::VectorXd& rho,
             bool leave_to_lower);
  double column_dot(int j, const double* row) const;
  /// x <- B^-1 x and x <- B^-T x.
  void ftran(Eigen::VectorXd& x) const;
  void btran(Eigen::VectorXd& x) const;
  void load_column(int j, Eigen::VectorXd& x) const;

  int n_{0};
  int m_{0};
  bool maximize_{true};
  double obj_constant_{0.0};
  // sparse columns of the structural part
  std::vector<int> col_start_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;
  std::vector<double> cost_;  // minimization costs, size n + m
  std::vector<double> lb_, ub_;
  std::vector<unsigned char> boxed_;  // infinite bounds replaced by virtual ones
  std::vector<int> head_;     // basic variable per basis position
  std::vector<int> pos_;      // basis position per variable or -1
  std::vector<State> state_;
  struct Eta {
    int r;
    double pivot;
    std::vector<std::pair<int, double>> entries;  // off-pivot part of the column
  };
  using Factor = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
  std::unique_ptr<Factor> lu_;  // null while the basis is the slack identity
  std::vector<Eta> etas_;
  Eigen::VectorXd dse_;  // squared norms of the rows of B^-1
  Eigen::VectorXd xb_;
  Eigen::VectorXd y_;
  std::vector<double> d_;
  long iterations_{0};
  int since_refactor_{0};
  long resets_{0};
};

}  // namespace stochvsl::detail
