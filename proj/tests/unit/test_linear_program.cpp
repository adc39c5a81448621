// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "harvest/linear_program.hpp"
#include "harvest/random.hpp"

using namespace harvest;
using doctest::Approx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// max eta s.t. eta <= (1/M) sum_m a_n[m] R(m, n), sum_n a_n[m] <= 1, 0 <= a <= 1.
// Variables: a in slot-major order, then eta.
LinearProgram scheduling_lp(const MatrixXd& rates) {
  const auto m_slots = rates.rows();
  const auto n_sn = rates.cols();
  const auto nv = m_slots * n_sn + 1;
  LinearProgram lp;
  lp.objective = VectorXd::Zero(nv);
  lp.objective(nv - 1) = 1.0;
  lp.a_ub = MatrixXd::Zero(n_sn + m_slots, nv);
  lp.b_ub = VectorXd::Zero(n_sn + m_slots);
  for (Eigen::Index n = 0; n < n_sn; ++n) {
    lp.a_ub(n, nv - 1) = 1.0;
    for (Eigen::Index m = 0; m < m_slots; ++m) lp.a_ub(n, m * n_sn + n) = -rates(m, n) / m_slots;
  }
  for (Eigen::Index m = 0; m < m_slots; ++m) {
    for (Eigen::Index n = 0; n < n_sn; ++n) lp.a_ub(n_sn + m, m * n_sn + n) = 1.0;
    lp.b_ub(n_sn + m) = 1.0;
  }
  lp.lower = VectorXd::Zero(nv);
  lp.upper = VectorXd::Ones(nv);
  lp.upper(nv - 1) = kInf;
  return lp;
}

void check_kkt(const LinearProgram& lp, const LpReport& r) {
  REQUIRE(r.status == SolverStatus::optimal);
  CHECK(r.duality_gap <= 1e-8);
  CHECK(r.feasibility_residual <= 1e-9);
  const VectorXd slack = lp.b_ub - lp.a_ub * r.x;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    CHECK(slack(i) >= -1e-9);
    CHECK(r.duals(i) >= -1e-12);
    CHECK(std::abs(r.duals(i) * slack(i)) <= 1e-9);
  }
  for (Eigen::Index j = 0; j < r.x.size(); ++j) {
    CHECK(r.x(j) >= lp.lower(j) - 1e-12);
    CHECK(r.x(j) <= lp.upper(j) + 1e-12);
  }
}

}  // namespace

TEST_CASE("single claimant takes every slot") {
  MatrixXd rates(6, 1);
  rates << 1.0, 2.0, 3.0, 4.0, 2.5, 0.5;
  const LinearProgram lp = scheduling_lp(rates);
  const LpReport r = solve_lp(lp);
  check_kkt(lp, r);
  for (int m = 0; m < 6; ++m) CHECK(r.x(m) == Approx(1.0));
  CHECK(r.objective == Approx(rates.mean()));
}

TEST_CASE("all-zero rates give a zero objective") {
  const LinearProgram lp = scheduling_lp(MatrixXd::Zero(5, 1));
  const LpReport r = solve_lp(lp);
  REQUIRE(r.status == SolverStatus::optimal);
  CHECK(r.objective == Approx(0.0));
}

TEST_CASE("two claimants against exhaustive binary schedules") {
  RandomStream rng(17, {0});
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd rates(10, 2);
    for (int m = 0; m < 10; ++m) {
      rates(m, 0) = 5.0 * rng.uniform();
      rates(m, 1) = trial < 5 ? rates(m, 0) : 5.0 * rng.uniform();
    }
    const LinearProgram lp = scheduling_lp(rates);
    const LpReport r = solve_lp(lp);
    check_kkt(lp, r);

    double best = 0.0;
    for (int mask = 0; mask < (1 << 10); ++mask) {
      double s0 = 0.0, s1 = 0.0;
      for (int m = 0; m < 10; ++m) ((mask >> m) & 1 ? s1 : s0) += rates(m, (mask >> m) & 1);
      best = std::max(best, std::min(s0, s1) / 10.0);
    }
    // a basic optimum has at most one split slot
    CHECK(r.objective >= best - 1e-12);
    CHECK(r.objective <= best + rates.maxCoeff() / 10.0 + 1e-12);

    double avg0 = 0.0, avg1 = 0.0;
    for (int m = 0; m < 10; ++m) {
      avg0 += r.x(2 * m) * rates(m, 0) / 10.0;
      avg1 += r.x(2 * m + 1) * rates(m, 1) / 10.0;
      CHECK(r.x(2 * m) + r.x(2 * m + 1) <= 1.0 + 1e-12);
    }
    CHECK(std::min(avg0, avg1) == Approx(r.objective));
    if (trial < 5) CHECK(avg0 == Approx(avg1).epsilon(1e-9));
  }
}

TEST_CASE("textbook instance and bounds") {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
  LinearProgram lp;
  lp.objective = VectorXd{{3.0, 5.0}};
  lp.a_ub = MatrixXd{{1, 0}, {0, 2}, {3, 2}};
  lp.b_ub = VectorXd{{4, 12, 18}};
  lp.lower = VectorXd::Zero(2);
  lp.upper = VectorXd::Constant(2, kInf);
  const LpReport r = solve_lp(lp);
  check_kkt(lp, r);
  CHECK(r.x(0) == Approx(2.0));
  CHECK(r.x(1) == Approx(6.0));
  CHECK(r.objective == Approx(36.0));

  // shifted and capped variables
  lp.lower = VectorXd{{-1.0, 1.0}};
  lp.upper = VectorXd{{kInf, 5.0}};
  const LpReport capped = solve_lp(lp);
  check_kkt(lp, capped);
  CHECK(capped.x(1) == Approx(5.0));
  CHECK(capped.x(0) == Approx(8.0 / 3.0));
}

TEST_CASE("infeasible and unbounded programs carry certificates") {
  LinearProgram bad;
  bad.objective = VectorXd{{1.0, 1.0}};
  bad.a_ub = MatrixXd{{1, 1}, {-1, -1}};
  bad.b_ub = VectorXd{{1, -3}};
  bad.lower = VectorXd::Zero(2);
  bad.upper = VectorXd::Constant(2, kInf);
  const LpReport r = solve_lp(bad);
  CHECK(r.status == SolverStatus::infeasible);
  REQUIRE(r.certificate.size() >= 2);
  const VectorXd y = r.certificate.head(2);
  CHECK((y.array() >= -1e-12).all());
  CHECK(((bad.a_ub.transpose() * y).array() >= -1e-9).all());
  CHECK(bad.b_ub.dot(y) < 0.0);

  LinearProgram open;
  open.objective = VectorXd{{1.0, 0.0}};
  open.a_ub = MatrixXd{{-1, 1}};
  open.b_ub = VectorXd{{1}};
  open.lower = VectorXd::Zero(2);
  open.upper = VectorXd::Constant(2, kInf);
  const LpReport u = solve_lp(open);
  CHECK(u.status == SolverStatus::unbounded);
  REQUIRE(u.certificate.size() == 2);
  CHECK((open.a_ub * u.certificate)(0) <= 1e-12);
  CHECK(open.objective.dot(u.certificate) > 0.0);
  CHECK((u.certificate.array() >= -1e-12).all());
}

TEST_CASE("degenerate instance terminates and is deterministic") {
  // Beale's cycling example (as a maximization)
  LinearProgram lp;
  lp.objective = VectorXd{{0.75, -150.0, 0.02, -6.0}};
  lp.a_ub = MatrixXd{{0.25, -60, -0.04, 9}, {0.5, -90, -0.02, 3}, {0, 0, 1, 0}};
  lp.b_ub = VectorXd{{0, 0, 1}};
  lp.lower = VectorXd::Zero(4);
  lp.upper = VectorXd::Constant(4, kInf);
  const LpReport a = solve_lp(lp);
  check_kkt(lp, a);
  CHECK(a.objective == Approx(0.05));
  const LpReport b = solve_lp(lp);
  CHECK(a.x == b.x);
  CHECK(a.pivots == b.pivots);
}
