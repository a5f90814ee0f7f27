#pragma once

#include <utility>
#include <vector>

namespace qccs::lp {

// Equality-form linear program:  maximize c.x  subject to  A x = b, x >= 0.
// Rows are sparse; the solver densifies internally.
struct Row {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

struct Result {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> x;
};

// `objective` may be empty for pure feasibility checks.  feas_tol bounds the
// accepted constraint violation after phase 1.
Result solve(int num_vars, const std::vector<Row>& rows, const std::vector<double>& objective,
             double feas_tol = 1e-7);

}  // namespace qccs::lp
