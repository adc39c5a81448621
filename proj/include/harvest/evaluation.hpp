// SPDX-License-Identifier: Apache-2.0
//
// Ground-truth scoring of plans: exact effective fading power at each
// scheduled link, Monte-Carlo outage counts, and the four benchmark schemes.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "harvest/channel.hpp"
#include "harvest/effective_fading.hpp"
#include "harvest/planner.hpp"

namespace harvest {

struct SlotOutage {
  int slot = 0;
  int sn = 0;
  double k = 0.0;     ///< Rician factor of the link
  double rate = 0.0;  ///< rate tested against the capacity draws
  std::uint64_t samples = 0;
  std::uint64_t outages = 0;
  [[nodiscard]] double frequency() const {
    return samples == 0 ? 0.0 : static_cast<double>(outages) / static_cast<double>(samples);
  }
};

struct EvalReport {
  std::string scheme;
  std::uint64_t seed = 0;
  Eigen::MatrixXd exact_rates;  ///< M x N, zero for unscheduled pairs
  double achieved = 0.0;        ///< max-min with exact f
  double estimated = 0.0;       ///< max-min under the planning model
  std::uint64_t trials = 0;
  int blocks_per_slot = 0;
  std::vector<SlotOutage> outage;
};

/// Rician factor of the (q, w, z) link under the scenario's angle model.
double link_rician_factor(const Scenario& scenario, const Point2& q, const Point2& w, double z);

/// Exact outage-aware rate of one link.
double exact_rate(const Scenario& scenario, int n, const Point2& q, double z);

/// Exact rates for every pair with a_n[m] > 0; zero elsewhere.
Eigen::MatrixXd achieved_rates(const Plan& plan, const Scenario& scenario);

/// For each pair with a_n[m] > 0, draws trials x L channel gains and counts
/// capacity < rates(m, n). Each (slot, sn, block) has its own substream.
std::vector<SlotOutage> monte_carlo_outage(const Plan& plan, const Scenario& scenario,
                                           const Eigen::MatrixXd& rates, std::uint64_t trials,
                                           std::uint64_t seed);

/// Scores an existing plan; Monte-Carlo is skipped when trials == 0.
EvalReport evaluate_plan(const Plan& plan, const Scenario& scenario, double estimated,
                         const std::string& scheme, std::uint64_t trials, std::uint64_t seed);

struct SchemeResult {
  Plan plan;  ///< rounded schedule
  RoundingResult rounding;
  EvalReport report;
  double altitude = 0.0;  ///< chosen fixed altitude (RFFSA), H for LB/RFLA
};

struct RunOptions {
  SchemeOptions planner;
  std::vector<double> fixed_altitudes{100, 125, 150, 175, 200, 225, 250, 275, 300};
  std::uint64_t trials = 0;
  std::uint64_t seed = 20190101;
};

SchemeResult run_scheme(Scheme scheme, const Scenario& scenario, const LogisticModel& model,
                        const RunOptions& options = {});

}  // namespace harvest
