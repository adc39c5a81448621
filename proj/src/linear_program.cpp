// SPDX-License-Identifier: Apache-2.0
#include "harvest/linear_program.hpp"

#include <cmath>
#include <limits>

#include "harvest/error.hpp"

namespace harvest {

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::infeasible: return "infeasible";
    case SolverStatus::unbounded: return "unbounded";
    case SolverStatus::stalled: return "stalled";
    case SolverStatus::infeasible_start: return "infeasible_start";
    case SolverStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;
constexpr int kMaxPivots = 200000;

struct Term {
  Eigen::Index col;
  double sign;
};

class Tableau {
 public:
  Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows) {}

  double& at(Eigen::Index i, Eigen::Index j) { return t_(i, j); }
  double& rhs(Eigen::Index i) { return t_(i, t_.cols() - 1); }
  double& cost(Eigen::Index j) { return t_(t_.rows() - 1, j); }
  [[nodiscard]] Eigen::Index rows() const { return t_.rows() - 1; }
  [[nodiscard]] Eigen::Index cols() const { return t_.cols() - 1; }
  std::vector<Eigen::Index>& basis() { return basis_; }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  /// Sets the cost row to c - c_B B^{-1} A for the given column costs.
  void price(const Eigen::VectorXd& costs) {
    t_.row(t_.rows() - 1).setZero();
    for (Eigen::Index j = 0; j < cols(); ++j) cost(j) = costs(j);
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double cb = costs(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(t_.rows() - 1) -= cb * t_.row(i);
    }
  }

  [[nodiscard]] double value() const { return -t_(t_.rows() - 1, t_.cols() - 1); }

 private:
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
};

enum class PhaseResult { optimal, unbounded, limit };

// Bland's rule: lowest-index improving column, lowest-index leaving variable
// among ratio ties.
PhaseResult run_simplex(Tableau& tab, Eigen::Index eligible_cols, int& pivots,
                        Eigen::Index& unbounded_col) {
  while (pivots < kMaxPivots) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < eligible_cols; ++j) {
      if (tab.cost(j) > kCostTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return PhaseResult::optimal;
    Eigen::Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
      const double a = tab.at(i, enter);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(0.0, tab.rhs(i)) / a;
      const double tie_tol = 1e-12 * std::max(1.0, std::abs(best_ratio));
      if (leave < 0 || ratio < best_ratio - tie_tol) {
        leave = i;
        best_ratio = ratio;
      } else if (ratio <= best_ratio + tie_tol &&
                 tab.basis()[static_cast<std::size_t>(i)] < tab.basis()[static_cast<std::size_t>(leave)]) {
        leave = i;
        best_ratio = std::min(best_ratio, ratio);
      }
    }
    if (leave < 0) {
      unbounded_col = enter;
      return PhaseResult::unbounded;
    }
    tab.pivot(leave, enter);
    ++pivots;
  }
  return PhaseResult::limit;
}

}  // namespace

LpReport solve_lp(const LinearProgram& lp) {
  const Eigen::Index n = lp.objective.size();
  const Eigen::Index m = lp.a_ub.rows();
  detail::require(lp.a_ub.cols() == n && lp.b_ub.size() == m && lp.lower.size() == n &&
                      lp.upper.size() == n,
                  "solve_lp: inconsistent dimensions");

  // x = offset + sum(sign * x'[col]), x' >= 0
  std::vector<std::vector<Term>> map(static_cast<std::size_t>(n));
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  std::vector<std::pair<Eigen::Index, double>> bound_rows;  // (transformed col, limit)
  std::vector<Eigen::Index> bound_var;
  Eigen::Index ncols = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lo = lp.lower(j);
    const double hi = lp.upper(j);
    detail::require(!(lo > hi), "solve_lp: lower bound exceeds upper bound");
    auto& terms = map[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) {
      offset(j) = lo;
      terms.push_back({ncols, 1.0});
      if (std::isfinite(hi)) {
        bound_rows.emplace_back(ncols, hi - lo);
        bound_var.push_back(j);
      }
      ++ncols;
    } else if (std::isfinite(hi)) {
      offset(j) = hi;
      terms.push_back({ncols++, -1.0});
    } else {
      terms.push_back({ncols++, 1.0});
      terms.push_back({ncols++, -1.0});
    }
  }

  const Eigen::Index rows = m + static_cast<Eigen::Index>(bound_rows.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, ncols);
  Eigen::VectorXd b(rows);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(ncols);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (const auto& t : map[static_cast<std::size_t>(j)]) {
      a.block(0, t.col, m, 1) += t.sign * lp.a_ub.col(j);
      c(t.col) += t.sign * lp.objective(j);
    }
  }
  b.head(m) = lp.b_ub - lp.a_ub * offset;
  for (std::size_t k = 0; k < bound_rows.size(); ++k) {
    a(m + static_cast<Eigen::Index>(k), bound_rows[k].first) = 1.0;
    b(m + static_cast<Eigen::Index>(k)) = bound_rows[k].second;
  }

  // columns: [x' | slacks | artificials]
  std::vector<Eigen::Index> art_rows;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (b(i) < 0.0) art_rows.push_back(i);
  }
  const Eigen::Index nart = static_cast<Eigen::Index>(art_rows.size());
  const Eigen::Index slack0 = ncols;
  const Eigen::Index art0 = ncols + rows;
  Tableau tab(rows, art0 + nart);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < ncols; ++j) tab.at(i, j) = a(i, j);
    tab.at(i, slack0 + i) = 1.0;
    tab.rhs(i) = b(i);
    tab.basis()[static_cast<std::size_t>(i)] = slack0 + i;
  }
  for (Eigen::Index k = 0; k < nart; ++k) {
    const Eigen::Index i = art_rows[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < art0; ++j) tab.at(i, j) = -tab.at(i, j);
    tab.rhs(i) = -tab.rhs(i);
    tab.at(i, art0 + k) = 1.0;
    tab.basis()[static_cast<std::size_t>(i)] = art0 + k;
  }

  LpReport report;
  Eigen::Index unbounded_col = -1;
  const double scale = rows > 0 ? std::max(1.0, b.cwiseAbs().maxCoeff()) : 1.0;

  if (nart > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(art0 + nart);
    phase1.tail(nart).setConstant(-1.0);
    tab.price(phase1);
    const auto res = run_simplex(tab, art0 + nart, report.pivots, unbounded_col);
    if (res == PhaseResult::limit) {
      report.status = SolverStatus::iteration_limit;
      return report;
    }
    if (tab.value() < -1e-9 * scale) {
      report.status = SolverStatus::infeasible;
      report.certificate.resize(rows);
      for (Eigen::Index i = 0; i < rows; ++i) report.certificate(i) = -tab.cost(slack0 + i);
      return report;
    }
    // drive zero-level artificials out of the basis where possible
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < art0) continue;
      for (Eigen::Index j = 0; j < art0; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-9) {
          tab.pivot(i, j);
          ++report.pivots;
          break;
        }
      }
    }
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(art0 + nart);
  phase2.head(ncols) = c;
  tab.price(phase2);
  const auto res = run_simplex(tab, art0, report.pivots, unbounded_col);
  if (res == PhaseResult::limit) {
    report.status = SolverStatus::iteration_limit;
    return report;
  }

  Eigen::VectorXd xt = Eigen::VectorXd::Zero(art0 + nart);
  for (Eigen::Index i = 0; i < rows; ++i) xt(tab.basis()[static_cast<std::size_t>(i)]) = tab.rhs(i);

  auto to_original = [&](const Eigen::VectorXd& xp, bool with_offset) {
    Eigen::VectorXd x = with_offset ? offset : Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (const auto& t : map[static_cast<std::size_t>(j)]) x(j) += t.sign * xp(t.col);
    }
    return x;
  };

  if (res == PhaseResult::unbounded) {
    report.status = SolverStatus::unbounded;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(art0 + nart);
    dir(unbounded_col) = 1.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      dir(tab.basis()[static_cast<std::size_t>(i)]) = -tab.at(i, unbounded_col);
    }
    report.certificate = to_original(dir, false);
    report.x = to_original(xt, true);
    return report;
  }

  report.status = SolverStatus::optimal;
  report.x = to_original(xt, true);
  report.objective = lp.objective.dot(report.x);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = -tab.cost(slack0 + i);
  report.duals = y.head(m);
  report.bound_duals = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < bound_var.size(); ++k) {
    report.bound_duals(bound_var[k]) = y(m + static_cast<Eigen::Index>(k));
  }
  report.duality_gap = std::abs(b.dot(y) - c.dot(xt.head(ncols)));

  double viol = 0.0;
  if (m > 0) viol = std::max(viol, (lp.a_ub * report.x - lp.b_ub).maxCoeff());
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(lp.lower(j))) viol = std::max(viol, lp.lower(j) - report.x(j));
    if (std::isfinite(lp.upper(j))) viol = std::max(viol, report.x(j) - lp.upper(j));
  }
  report.feasibility_residual = std::max(0.0, viol);
  return report;
}

}  // namespace harvest
