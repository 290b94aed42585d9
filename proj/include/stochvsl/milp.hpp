#pragma once

// Built-in LP/MILP solver (bounded dual simplex + branch and bound) and
// LP/MPS text interchange.

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stochvsl/lp_model.hpp"

namespace stochvsl {

enum class SolveStatus { optimal, gap_limit, infeasible, unbounded, node_limit, time_limit };

const char* to_string(SolveStatus s);

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolveOptions {
  double feasibility_tol{1e-6};
  double integrality_tol{1e-6};
  double relative_gap{1e-4};
  long node_limit{1'000'000};
  double time_limit{3600.0};  // seconds
  /// Preferred values for binaries, followed by the first dive.
  std::vector<std::pair<int, double>> hint;
};

struct Solution {
  SolveStatus status{SolveStatus::infeasible};
  std::vector<double> x;
  double objective{0.0};       // incumbent, in the model's own sense
  double bound{0.0};           // best proven bound
  double root_relaxation{0.0};
  long nodes{0};
  long lp_iterations{0};
  double seconds{0.0};

  bool has_solution() const { return !x.empty(); }
  double gap() const;
};

/// Solves the continuous relaxation (binaries relaxed to [0, 1]).
Solution solve_lp_relaxation(const LinearProgram& lp, const SolveOptions& opts = {});

/// Depth-first branch and bound with best-bound restarts. Reliability
/// branching: pseudocosts seeded by strong branching, ties broken by the
/// lowest variable id.
Solution branch_and_bound(const LinearProgram& lp, const SolveOptions& opts = {});

enum class ModelFormat { lp, mps };

std::string format_model(const LinearProgram& lp, ModelFormat format);
void export_model(const LinearProgram& lp, const std::string& path, ModelFormat format);
LinearProgram parse_model(const std::string& text, ModelFormat format);
LinearProgram import_model(const std::string& path, ModelFormat format);

}  // namespace stochvsl
