#include "qccs/lp.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "qccs/errors.hpp"

namespace qccs::lp {

namespace {

constexpr double kPivotTol = 1e-10;

// Dense simplex tableau.  Rows 0..m-1 hold constraints, row m the (phase)
// objective in reduced-cost form; column n_total holds the right-hand side.
class Tableau {
 public:
  Tableau(int m, int n_total) : m_(m), n_(n_total), t_(static_cast<size_t>(m + 1) * (n_total + 1), 0.0) {}

  double& at(int r, int c) { return t_[static_cast<size_t>(r) * (n_ + 1) + c]; }
  double at(int r, int c) const { return t_[static_cast<size_t>(r) * (n_ + 1) + c]; }
  double* row(int r) { return &t_[static_cast<size_t>(r) * (n_ + 1)]; }

  int m() const { return m_; }
  int n() const { return n_; }

  void pivot(int pr, int pc) {
    double* prow = row(pr);
    double inv = 1.0 / prow[pc];
    for (int j = 0; j <= n_; ++j) prow[j] *= inv;
    prow[pc] = 1.0;
    for (int i = 0; i <= m_; ++i) {
      if (i == pr) continue;
      double* r = row(i);
      double f = r[pc];
      if (std::abs(f) < kPivotTol) {
        r[pc] = 0.0;
        continue;
      }
      for (int j = 0; j <= n_; ++j) r[j] -= f * prow[j];
      r[pc] = 0.0;
    }
  }

 private:
  int m_, n_;
  std::vector<double> t_;
};

// Runs simplex iterations on the objective stored in row m.  `allowed(j)`
// filters candidate entering columns.  Returns false when the iteration cap
// is hit (treated as an internal error by the caller).
template <class Allowed>
bool iterate(Tableau& t, std::vector<int>& basis, Allowed allowed) {
  const int m = t.m(), n = t.n();
  long iter = 0;
  const long cap = 200000;
  const long bland_after = 4L * (m + n);
  for (;;) {
    if (++iter > cap) return false;
    bool bland = iter > bland_after;
    int pc = -1;
    double best = -kPivotTol;
    for (int j = 0; j < n; ++j) {
      if (!allowed(j)) continue;
      double rc = t.at(m, j);
      if (rc < -kPivotTol) {
        if (bland) {
          pc = j;
          break;
        }
        if (rc < best) {
          best = rc;
          pc = j;
        }
      }
    }
    if (pc < 0) return true;  // optimal
    int pr = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      double a = t.at(i, pc);
      if (a > kPivotTol) {
        double ratio = t.at(i, t.n()) / a;
        if (ratio < best_ratio - kPivotTol ||
            (ratio < best_ratio + kPivotTol && pr >= 0 && basis[static_cast<size_t>(i)] < basis[static_cast<size_t>(pr)])) {
          best_ratio = ratio;
          pr = i;
        }
      }
    }
    if (pr < 0) return true;  // unbounded; caller inspects objective
    t.pivot(pr, pc);
    basis[static_cast<size_t>(pr)] = pc;
  }
}

}  // namespace

Result solve(int num_vars, const std::vector<Row>& rows, const std::vector<double>& objective,
             double feas_tol) {
  const int m = static_cast<int>(rows.size());
  const int n = num_vars;
  const int n_total = n + m;  // artificial variable per row
  Tableau t(m, n_total);
  std::vector<int> basis(static_cast<size_t>(m));

  for (int i = 0; i < m; ++i) {
    double sign = rows[static_cast<size_t>(i)].rhs < 0 ? -1.0 : 1.0;
    for (const auto& [j, v] : rows[static_cast<size_t>(i)].coeffs) {
      if (j < 0 || j >= n) fail_validation("lp: column index out of range");
      t.at(i, j) += sign * v;
    }
    t.at(i, n + i) = 1.0;
    t.at(i, n_total) = sign * rows[static_cast<size_t>(i)].rhs;
    basis[static_cast<size_t>(i)] = n + i;
  }

  // Phase 1: minimize the artificials.  Reduced costs of the original
  // columns are the negated column sums; the artificial basis starts at 0.
  for (int j = 0; j <= n_total; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += t.at(i, j);
    t.at(m, j) = (j < n || j == n_total) ? -s : 0.0;
  }
  if (!iterate(t, basis, [n](int j) { return j < n; }))
    throw Error(Error::Kind::Internal, "lp: phase 1 iteration cap exceeded");
  double infeas = -t.at(m, n_total);
  if (infeas > feas_tol) return {};  // infeasible

  // Pivot leftover artificials out of the basis where possible; a row with
  // no available pivot is redundant and stays at level zero.
  for (int i = 0; i < m; ++i) {
    if (basis[static_cast<size_t>(i)] < n) continue;
    int pc = -1;
    for (int j = 0; j < n; ++j)
      if (std::abs(t.at(i, j)) > 1e-8) {
        pc = j;
        break;
      }
    if (pc >= 0) {
      t.pivot(i, pc);
      basis[static_cast<size_t>(i)] = pc;
    }
  }

  if (!objective.empty()) {
    // Phase 2 objective row: reduced costs -c_j, corrected for the basis.
    for (int j = 0; j <= n_total; ++j) t.at(m, j) = 0.0;
    for (int j = 0; j < n && j < static_cast<int>(objective.size()); ++j)
      t.at(m, j) = -objective[static_cast<size_t>(j)];
    for (int i = 0; i < m; ++i) {
      int b = basis[static_cast<size_t>(i)];
      if (b < n && b < static_cast<int>(objective.size()) && objective[static_cast<size_t>(b)] != 0.0) {
        double f = objective[static_cast<size_t>(b)];
        for (int j = 0; j <= n_total; ++j) t.at(m, j) += f * t.at(i, j);
        t.at(m, b) = 0.0;
      }
    }
    if (!iterate(t, basis, [&](int j) {
          if (j >= n) return false;  // artificials stay out
          return true;
        }))
      throw Error(Error::Kind::Internal, "lp: phase 2 iteration cap exceeded");
  }

  Result res;
  res.feasible = true;
  res.x.assign(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < m; ++i) {
    int b = basis[static_cast<size_t>(i)];
    if (b < n) res.x[static_cast<size_t>(b)] = t.at(i, n_total);
  }
  if (!objective.empty()) {
    double obj = 0.0;
    for (int j = 0; j < n && j < static_cast<int>(objective.size()); ++j)
      obj += objective[static_cast<size_t>(j)] * res.x[static_cast<size_t>(j)];
    res.objective = obj;
  }
  return res;
}

}  // namespace qccs::lp
