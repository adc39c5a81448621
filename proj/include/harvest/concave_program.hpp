// SPDX-License-Identifier: Apache-2.0
//
// Log-barrier method for maximizing a linear objective over smooth
// concave inequalities, smooth second-order-cone rows and box bounds, with
// fixed (pinned) coordinates removed from the Newton system. Each centering
// step is a primal-dual Newton step damped by backtracking on the barrier.

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "harvest/linear_program.hpp"

namespace harvest {

using Triplet = Eigen::Triplet<double>;

/// g(x) >= 0 with g concave. The evaluator receives x restricted to
/// `support` and, when the pointers are non-null, fills the gradient and the
/// Hessian (as symmetric triplets, both triangles) in support-local indices.
struct ConcaveConstraint {
  std::vector<Eigen::Index> support;
  std::function<double(const Eigen::VectorXd& local, Eigen::VectorXd* grad,
                       std::vector<Triplet>* hess)>
      eval;
};

/// sum_k coef_k x[index_k] + constant
struct LinearForm {
  std::vector<std::pair<Eigen::Index, double>> terms;
  double constant = 0.0;
  [[nodiscard]] double value(const Eigen::VectorXd& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * x(i);
    return v;
  }
};

/// radius^2 - sum_k rows_k(x)^2 >= 0
struct SocConstraint {
  double radius = 0.0;
  std::vector<LinearForm> rows;
};

struct ConcaveProgram {
  Eigen::VectorXd objective;  ///< maximize objective' x
  std::vector<ConcaveConstraint> constraints;
  std::vector<SocConstraint> cones;
  Eigen::VectorXd lower;  ///< may hold -inf
  Eigen::VectorXd upper;  ///< may hold +inf
  std::vector<std::pair<Eigen::Index, double>> pins;

  explicit ConcaveProgram(Eigen::Index n = 0);
  [[nodiscard]] Eigen::Index size() const { return objective.size(); }
};

struct BarrierOptions {
  double mu_start = 1.0;
  double mu_final = 1e-9;
  double mu_factor = 10.0;
  int max_newton_per_stage = 400;
  /// Constraints with a larger support enter the Newton system as bordered
  /// rank-one columns instead of dense outer products.
  std::size_t low_rank_support = 48;
};

struct SolverReport {
  SolverStatus status = SolverStatus::stalled;
  Eigen::VectorXd x;
  double objective = 0.0;
  double feasibility_residual = 0.0;
  double stationarity_residual = 0.0;
  int iterations = 0;
  /// objective after each centering step
  std::vector<double> trace;
};

SolverReport maximize_concave_program(const ConcaveProgram& cp, const Eigen::VectorXd& start,
                                      const BarrierOptions& options = {});

}  // namespace harvest
