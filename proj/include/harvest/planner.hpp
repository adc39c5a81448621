// SPDX-License-Identifier: Apache-2.0
//
// Max-min trajectory and scheduling design by block coordinate descent over
// (schedule, horizontal path, altitude profile), each non-schedule block
// solved through a concave surrogate that is tight at the current iterate.
//
// Slot m (0-based, m < M) is served from trajectory point m; points 0 and M
// are the pinned endpoints.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "harvest/channel.hpp"
#include "harvest/concave_program.hpp"
#include "harvest/effective_fading.hpp"

namespace harvest {

struct Plan {
  std::vector<Point2> q;  ///< M + 1 horizontal points
  std::vector<double> z;  ///< M + 1 altitudes
  Eigen::MatrixXd a;      ///< M x N schedule
  double eta = 0.0;       ///< max-min rate under the planning model
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  /// one entry per block solve that fell back to the identity update
  std::vector<std::string> notes;

  [[nodiscard]] int slots() const { return static_cast<int>(a.rows()); }
};

/// Surrogate constants for one (n, m) pair at an expansion point.
struct SCACoefficients {
  double r_hat = 0.0;
  double phi_hat = 0.0;
  double psi_hat = 0.0;
  double s_hat = 0.0;
  double v_hat = 1.0;
  double lambda_hat = 0.0;
};

enum class Scheme { lb, rfla, rffsa, rfb };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct SchemeOptions {
  bool line_of_sight = false;      ///< plan with f == 1
  bool optimize_altitude = true;   ///< run the vertical block
  std::optional<double> altitude;  ///< initial constant-altitude profile target
  int max_iterations = 50;
  double tolerance = 1e-4;
  bool linearize_v = false;  ///< first-order upper bound for v in the vertical block
  bool dense_s = false;      ///< instantiate s for every (n, m), mainly for testing
  BarrierOptions barrier;
};

/// Throws InvalidInput, naming the minimum T, when the endpoints cannot be
/// joined within the speed limits.
void check_reachable(const Scenario& scenario);

/// Straight line between the endpoints with a uniform schedule.
Plan initialize_plan(const Scenario& scenario);

/// Constant-altitude target h clipped to what the speed limit allows from
/// both endpoints, never below H.
std::vector<double> fixed_altitude_profile(const Scenario& scenario, double h);

double approx_rate(const LogisticModel& model, double gamma, const Point2& q, const Point2& w,
                   double z, double alpha);

/// M x N matrix of model rates at the plan's geometry.
Eigen::MatrixXd rate_matrix(const std::vector<Point2>& q, const std::vector<double>& z,
                            const Scenario& scenario, const LogisticModel& model);

/// min_n (1/M) sum_m a_n[m] R_n[m]
double max_min_rate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rates);
double plan_objective(const Plan& plan, const Scenario& scenario, const LogisticModel& model);

/// Rate surrogate constants. The same expressions serve the vertical block
/// when q_hat is the fixed horizontal point and z is the expansion altitude.
SCACoefficients horizontal_coefficients(const LogisticModel& model, double gamma,
                                        const Point2& q_hat, const Point2& w, double z,
                                        double alpha);

struct VBound {
  double v_hat;
  double lambda_hat;
};
VBound v_bound_coefficients(const Point2& q_hat, const Point2& w, double z);

/// Lower bound of the model rate around q_hat (s free).
double rate_lower_bound(const SCACoefficients& c, double s, const Point2& q, const Point2& q_hat,
                        const Point2& w);

/// Relaxed optimal schedule; unused slot capacity is handed to the best SN.
Eigen::MatrixXd solve_scheduling(const Plan& plan, const Scenario& scenario,
                                 const LogisticModel& model);

struct BlockStep {
  Plan plan;  ///< input plan with the block replaced when the solve succeeded
  SolverReport report;
  double eta_lb = 0.0;  ///< surrogate objective at the returned point
  Eigen::MatrixXd s;    ///< tightened s (M x N), NaN where not instantiated
  bool updated = false;
};

BlockStep solve_horizontal(const Plan& plan, const Scenario& scenario, const LogisticModel& model,
                           const SchemeOptions& options = {});
BlockStep solve_vertical(const Plan& plan, const Scenario& scenario, const LogisticModel& model,
                         const SchemeOptions& options = {});

Plan run_bcd(const Scenario& scenario, const LogisticModel& model, const SchemeOptions& options = {});
/// Same loop from a caller-supplied starting plan.
Plan run_bcd_from(Plan plan, const Scenario& scenario, const LogisticModel& model,
                  const SchemeOptions& options);

struct RoundingResult {
  Eigen::MatrixXd a;
  double relaxed_eta = 0.0;
  double rounded_eta = 0.0;
  int moves = 0;
};

/// Per-slot argmax (lowest index on ties) followed by greedy slot moves
/// that raise the minimum average rate.
RoundingResult round_schedule(const Eigen::MatrixXd& relaxed, const Eigen::MatrixXd& rates);

/// Checks speed, endpoint, altitude and per-slot schedule invariants.
/// Returns an empty string when all hold, otherwise the first violation.
std::string check_plan(const Plan& plan, const Scenario& scenario);

}  // namespace harvest
