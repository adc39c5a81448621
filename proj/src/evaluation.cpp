// SPDX-License-Identifier: Apache-2.0
#include "harvest/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "harvest/error.hpp"

namespace harvest {

using detail::require;
using Eigen::MatrixXd;

double link_rician_factor(const Scenario& scenario, const Point2& q, const Point2& w, double z) {
  const double theta = std::min(elevation_angle(q, w, z), std::numbers::pi / 2.0);
  return rician_factor(theta, scenario.a1, scenario.a2);
}

double exact_rate(const Scenario& scenario, int n, const Point2& q, double z) {
  const Point2& w = scenario.sensors.at(static_cast<std::size_t>(n));
  const double f = exact_effective_power(link_rician_factor(scenario, q, w, z), scenario.epsilon);
  return outage_rate(f, scenario.gamma(n), q, w, z, scenario.alpha);
}

MatrixXd achieved_rates(const Plan& plan, const Scenario& scenario) {
  const int m_slots = scenario.slots;
  const int n_sn = scenario.num_sensors();
  require(plan.a.rows() == m_slots && plan.a.cols() == n_sn, "achieved_rates: schedule must be M x N");
  MatrixXd r = MatrixXd::Zero(m_slots, n_sn);
  for (int m = 0; m < m_slots; ++m) {
    for (int n = 0; n < n_sn; ++n) {
      if (plan.a(m, n) > 0.0) {
        r(m, n) = exact_rate(scenario, n, plan.q[static_cast<std::size_t>(m)], plan.z[static_cast<std::size_t>(m)]);
      }
    }
  }
  return r;
}

std::vector<SlotOutage> monte_carlo_outage(const Plan& plan, const Scenario& scenario,
                                           const MatrixXd& rates, std::uint64_t trials,
                                           std::uint64_t seed) {
  require(trials >= 10000, "monte_carlo_outage: at least 1e4 trials are required");
  require(rates.rows() == plan.a.rows() && rates.cols() == plan.a.cols(),
          "monte_carlo_outage: rate matrix must be M x N");
  std::vector<SlotOutage> out;
  const auto blocks = static_cast<std::uint64_t>(scenario.blocks_per_slot);
  for (int m = 0; m < plan.a.rows(); ++m) {
    for (int n = 0; n < plan.a.cols(); ++n) {
      if (!(plan.a(m, n) > 0.0)) continue;
      const Point2& q = plan.q[static_cast<std::size_t>(m)];
      const Point2& w = scenario.sensors[static_cast<std::size_t>(n)];
      const double z = plan.z[static_cast<std::size_t>(m)];
      SlotOutage s;
      s.slot = m;
      s.sn = n;
      s.k = link_rician_factor(scenario, q, w, z);
      s.rate = rates(m, n);
      const double beta = pathloss(distance(q, w, z), scenario.beta0, scenario.alpha);
      const double power = scenario.tx_power[static_cast<std::size_t>(n)];
      for (std::uint64_t b = 0; b < blocks; ++b) {
        RandomStream stream(seed, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(n), b});
        for (std::uint64_t t = 0; t < trials; ++t) {
          const auto g = sample_rician(s.k, stream);
          if (instantaneous_capacity(g, beta, power, scenario.sigma2, scenario.snr_gap) < s.rate) ++s.outages;
        }
        s.samples += trials;
      }
      out.push_back(s);
    }
  }
  return out;
}

EvalReport evaluate_plan(const Plan& plan, const Scenario& scenario, double estimated,
                         const std::string& scheme, std::uint64_t trials, std::uint64_t seed) {
  EvalReport rep;
  rep.scheme = scheme;
  rep.seed = seed;
  rep.exact_rates = achieved_rates(plan, scenario);
  rep.achieved = max_min_rate(plan.a, rep.exact_rates);
  rep.estimated = estimated;
  rep.trials = trials;
  rep.blocks_per_slot = scenario.blocks_per_slot;
  if (trials > 0) rep.outage = monte_carlo_outage(plan, scenario, rep.exact_rates, trials, seed);
  return rep;
}

namespace {

SchemeResult plan_and_score(const Scenario& scenario, const LogisticModel& planning_model,
                            const SchemeOptions& opts, const std::string& label) {
  SchemeResult res;
  Plan plan = run_bcd(scenario, planning_model, opts);
  const MatrixXd rates = rate_matrix(plan.q, plan.z, scenario, planning_model);
  res.rounding = round_schedule(plan.a, rates);
  plan.a = res.rounding.a;
  plan.eta = res.rounding.rounded_eta;
  res.plan = std::move(plan);
  res.report = evaluate_plan(res.plan, scenario, res.plan.eta, label, 0, 0);
  return res;
}

}  // namespace

SchemeResult run_scheme(Scheme scheme, const Scenario& scenario, const LogisticModel& model,
                        const RunOptions& options) {
  scenario.validate();
  SchemeOptions opts = options.planner;
  SchemeResult best;
  switch (scheme) {
    case Scheme::lb:
      opts.line_of_sight = true;
      opts.optimize_altitude = false;
      opts.altitude = scenario.min_altitude;
      best = plan_and_score(scenario, LogisticModel::line_of_sight(), opts, "lb");
      best.altitude = scenario.min_altitude;
      break;
    case Scheme::rfla:
      opts.optimize_altitude = false;
      opts.altitude = scenario.min_altitude;
      best = plan_and_score(scenario, model, opts, "rfla");
      best.altitude = scenario.min_altitude;
      break;
    case Scheme::rffsa: {
      require(!options.fixed_altitudes.empty(), "run_scheme: RFFSA needs candidate altitudes");
      bool first = true;
      for (double h : options.fixed_altitudes) {
        opts.optimize_altitude = false;
        opts.altitude = h;
        SchemeResult r = plan_and_score(scenario, model, opts, "rffsa");
        r.altitude = h;
        if (first || r.report.achieved > best.report.achieved) best = std::move(r);
        first = false;
      }
      break;
    }
    case Scheme::rfb:
      opts.optimize_altitude = true;
      best = plan_and_score(scenario, model, opts, "rfb");
      best.altitude = scenario.min_altitude;
      break;
  }
  best.report.seed = options.seed;
  if (options.trials > 0) {
    best.report.trials = options.trials;
    best.report.outage = monte_carlo_outage(best.plan, scenario, best.report.exact_rates, options.trials, options.seed);
  }
  return best;
}

}  // namespace harvest
