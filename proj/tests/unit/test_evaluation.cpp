// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "harvest/error.hpp"
#include "harvest/evaluation.hpp"

using namespace harvest;
using doctest::Approx;
using Eigen::MatrixXd;

namespace {

// Plan that hovers over the sensor for the whole mission.
Plan hover_plan(const Scenario& s, const Point2& at, double z) {
  Plan p = initialize_plan(s);
  for (std::size_t i = 0; i < p.q.size(); ++i) {
    p.q[i] = at;
    p.z[i] = z;
  }
  return p;
}

}  // namespace

TEST_CASE("achieved rate while hovering overhead") {
  Scenario s = testing::default_scenario();
  const Point2 w = s.sensors[0];
  const Plan p = hover_plan(s, w, 100.0);
  const MatrixXd r = achieved_rates(p, s);
  const double f = exact_effective_power(1000.0, 0.01);
  CHECK(f > 0.85);
  CHECK(f < 1.0);
  CHECK(r(0, 0) == Approx(std::log2(1.0 + f * s.gamma(0) / 1e4)));
  CHECK(r(0, 0) == Approx(std::log2(1.0 + f * 120.2)).epsilon(1e-3));
  CHECK(link_rician_factor(s, w, w, 100.0) == Approx(1000.0));

  // the achieved rate approaches the line-of-sight rate as K grows
  const double los_rate = outage_rate(1.0, s.gamma(0), w, w, 100.0, 2.0);
  double prev_gap = 1.0;
  for (double k_db : {40.0, 80.0, 120.0}) {
    Scenario los = testing::default_scenario({{200, 0}}, k_db, k_db);
    const double gap = los_rate - achieved_rates(hover_plan(los, w, 100.0), los)(0, 0);
    CHECK(gap >= 0.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 1e-5);
}

TEST_CASE("achieved max-min is the smallest scheduled average") {
  const Scenario s = testing::default_scenario(testing::four_sensors());
  Plan p = initialize_plan(s);
  p.a.setZero();
  for (int m = 0; m < 130; ++m) p.a(m, m % 4) = 1.0;
  const MatrixXd r = achieved_rates(p, s);
  for (int m = 0; m < 130; ++m)
    for (int n = 0; n < 4; ++n) CHECK((p.a(m, n) > 0.0) == (r(m, n) > 0.0));
  double worst = 1e300;
  for (int n = 0; n < 4; ++n) worst = std::min(worst, r.col(n).sum() / 130.0);
  const EvalReport rep = evaluate_plan(p, s, 1.0, "rfb", 0, 1);
  CHECK(rep.achieved == Approx(worst));
  CHECK(rep.outage.empty());
}

TEST_CASE("raising the outage target never lowers an achieved rate") {
  Scenario s = testing::default_scenario(testing::four_sensors());
  const Plan p = initialize_plan(s);
  MatrixXd prev = achieved_rates(p, s);
  for (double eps : {0.02, 0.05, 0.1}) {
    s.epsilon = eps;
    const MatrixXd r = achieved_rates(p, s);
    CHECK(((r - prev).array() >= -1e-12).all());
    prev = r;
  }
}

TEST_CASE("monte carlo outage on a Rayleigh link hits the target") {
  Scenario s = testing::default_scenario();
  s.kmin = s.kmax = s.a1 = 1e-12;
  s.a2 = 0.0;
  Plan p = initialize_plan(s);
  p.a.setZero();
  p.a(10, 0) = p.a(60, 0) = p.a(120, 0) = 1.0;
  MatrixXd rates = MatrixXd::Zero(130, 1);
  for (int m : {10, 60, 120}) {
    const auto i = static_cast<std::size_t>(m);
    rates(m, 0) = outage_rate(-std::log1p(-0.01), s.gamma(0), p.q[i], s.sensors[0], p.z[i], s.alpha);
  }
  const auto out = monte_carlo_outage(p, s, rates, 10000, 5);
  REQUIRE(out.size() == 3);
  for (const auto& o : out) {
    CHECK(o.samples == 100000);
    CHECK(std::abs(o.frequency() - 0.01) <= 0.001);
  }
  const auto zero = monte_carlo_outage(p, s, MatrixXd::Zero(130, 1), 10000, 5);
  for (const auto& o : zero) CHECK(o.outages == 0);

  CHECK(monte_carlo_outage(p, s, rates, 10000, 5)[1].outages == out[1].outages);
  CHECK_THROWS_AS(monte_carlo_outage(p, s, rates, 100, 5), InvalidInput);
}

TEST_CASE("monte carlo outage at exact rates stays within three sigma") {
  const Scenario s = testing::default_scenario();
  Plan p = initialize_plan(s);
  p.a.setZero();
  for (int m = 0; m < 130; m += 13) p.a(m, 0) = 1.0;
  const MatrixXd rates = achieved_rates(p, s);
  const auto out = monte_carlo_outage(p, s, rates, 10000, 11);
  REQUIRE(out.size() == 10);
  for (const auto& o : out) {
    const double sigma = std::sqrt(0.01 * 0.99 / static_cast<double>(o.samples));
    CHECK(std::abs(o.frequency() - 0.01) <= 3.0 * sigma);
  }
}

TEST_CASE("confidence width shrinks with the trial count") {
  Scenario s = testing::default_scenario();
  Plan p = initialize_plan(s);
  p.a.setZero();
  for (int m = 0; m < 130; m += 2) p.a(m, 0) = 1.0;
  const MatrixXd rates = achieved_rates(p, s);
  auto spread = [&](std::uint64_t trials) {
    double ss = 0.0;
    const auto out = monte_carlo_outage(p, s, rates, trials, 3);
    for (const auto& o : out) ss += (o.frequency() - 0.01) * (o.frequency() - 0.01);
    return std::sqrt(ss / static_cast<double>(out.size()));
  };
  const double ratio = spread(10000) / spread(40000);
  CHECK(ratio > 1.3);
  CHECK(ratio < 3.0);
}
