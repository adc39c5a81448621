// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace harvest {

enum class SolverStatus { optimal, infeasible, unbounded, stalled, infeasible_start, iteration_limit };

std::string to_string(SolverStatus status);

/// maximize objective' x  s.t.  a_ub x <= b_ub,  lower <= x <= upper.
/// Bounds may be infinite.
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct LpReport {
  SolverStatus status = SolverStatus::iteration_limit;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Multipliers of the a_ub rows (>= 0 at an optimum).
  Eigen::VectorXd duals;
  /// Multipliers of the finite upper-bound rows, in variable order.
  Eigen::VectorXd bound_duals;
  double duality_gap = 0.0;
  double feasibility_residual = 0.0;
  int pivots = 0;
  /// infeasible: Farkas vector y >= 0 over [a_ub rows; upper-bound rows] with
  /// y'A >= 0 and y'b < 0 in the lower-bound-shifted system.
  /// unbounded: a recession direction d with a_ub d <= 0 and objective' d > 0.
  Eigen::VectorXd certificate;
};

/// Dense two-phase primal simplex with Bland's anti-cycling rule.
LpReport solve_lp(const LinearProgram& lp);

}  // namespace harvest
