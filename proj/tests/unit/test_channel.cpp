// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "fixtures.hpp"
#include "harvest/channel.hpp"
#include "harvest/error.hpp"

using namespace harvest;
using doctest::Approx;

namespace {

// Q1(a, b) as 1 - cdf of a noncentral chi-square with 2 dof at b^2.
double marcum_oracle(double a, double b) {
  boost::math::non_central_chi_squared_distribution<double> d(2.0, a * a);
  return boost::math::cdf(boost::math::complement(d, b * b));
}

// Q1(a, b) by integrating the Rician envelope density over [b, inf).
double marcum_quadrature(double a, double b) {
  auto pdf = [a](double x) {
    // exp(-(x^2 + a^2)/2) I0(a x) with the Bessel scaling folded in
    const double ax = a * x;
    return x * std::exp(-0.5 * (x - a) * (x - a)) * std::exp(-ax) * boost::math::cyl_bessel_i(0, ax);
  };
  double err = 0.0;
  const double upper = a + b + 40.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(pdf, b, upper, 20, 1e-14, &err);
}

double ks_statistic(std::vector<double> xs, double k) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = fading_power_cdf(xs[i], k);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

}  // namespace

TEST_CASE("distance") {
  CHECK(distance({3, 4}, {0, 0}, 12) == Approx(13.0).epsilon(1e-15));
  CHECK(distance({7, 7}, {7, 7}, 100) == 100.0);
  CHECK(distance({1000, 500}, {200, 0}, 100) == Approx(std::sqrt(800.0 * 800 + 500 * 500 + 100 * 100)));
  CHECK_THROWS_AS(distance({0, 0}, {0, 0}, 0.0), InvalidInput);
  CHECK_THROWS_AS(distance({0, 0}, {0, 0}, -5.0), InvalidInput);
}

TEST_CASE("pathloss") {
  CHECK(pathloss(1.0, 1e-6, 2.0) == Approx(1e-6));
  CHECK(pathloss(100.0, 1e-6, 2.0) == Approx(1e-10));
  CHECK(pathloss(10.0, 1e-6, 3.0) == Approx(1e-9));
  CHECK_THROWS_AS(pathloss(0.5, 1e-6, 2.0), InvalidInput);
  double prev = pathloss(1.0, 1e-6, 2.5);
  for (double d = 2.0; d < 2000.0; d *= 1.7) {
    const double g = pathloss(d, 1e-6, 2.5);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("elevation angle and angle indicator") {
  CHECK(elevation_angle({5, 5}, {5, 5}, 40) == Approx(std::numbers::pi / 2));
  CHECK(elevation_angle({100, 0}, {0, 0}, 100) == Approx(std::numbers::pi / 4));
  CHECK(elevation_angle({1e8, 0}, {0, 0}, 100) == Approx(0.0).epsilon(1e-5));
  CHECK(angle_indicator({2, 2}, {2, 2}, 10) == 1.0);
  CHECK(angle_indicator({100, 0}, {0, 0}, 100) == Approx(1.0 / std::sqrt(2.0)));
  CHECK(angle_indicator({3, 0}, {0, 0}, 4) == Approx(0.8));
}

TEST_CASE("distance and indicator properties on random geometry") {
  RandomStream rng(11, {1});
  for (int i = 0; i < 2000; ++i) {
    const Point2 q{2000 * rng.uniform() - 1000, 2000 * rng.uniform() - 1000};
    const Point2 w{2000 * rng.uniform() - 1000, 2000 * rng.uniform() - 1000};
    const double z = 1 + 500 * rng.uniform();
    const double d = distance(q, w, z);
    CHECK(d >= z);
    CHECK(angle_indicator(q, w, z) == z / d);
    const double v = angle_indicator(q, w, z);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("rician factor and its coefficients") {
  const auto [a1, a2] = rician_coeffs_from_bounds(1.0, 1000.0);
  CHECK(a1 == 1.0);
  CHECK(a2 == Approx(4.3976).epsilon(1e-4));
  CHECK(a2 == Approx(2.0 * std::log(1000.0) / std::numbers::pi));
  CHECK(rician_factor(0.0, a1, a2) == Approx(1.0));
  CHECK(rician_factor(std::numbers::pi / 2, a1, a2) == Approx(1000.0));

  const auto flat = rician_coeffs_from_bounds(1.0, 1.0);
  CHECK(flat.a1 == 1.0);
  CHECK(flat.a2 == 0.0);
  const auto ten = rician_coeffs_from_bounds(10.0, 10.0);
  CHECK(ten.a1 == 10.0);
  CHECK(ten.a2 == 0.0);

  CHECK_THROWS_AS(rician_coeffs_from_bounds(0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(rician_coeffs_from_bounds(10.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(rician_factor(-0.1, a1, a2), InvalidInput);
  CHECK_THROWS_AS(rician_factor(2.0, a1, a2), InvalidInput);

  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double k = rician_factor(i * std::numbers::pi / 200, a1, a2);
    CHECK(k > prev);
    CHECK(k >= 1.0 - 1e-12);
    CHECK(k <= 1000.0 * (1 + 1e-12));
    prev = k;
    CHECK(rician_factor(i * std::numbers::pi / 200, 10.0, 0.0) == 10.0);
  }
}

TEST_CASE("marcum q1 identities") {
  CHECK(marcum_q1(0.0, 2.0) == Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(marcum_q1(5.0, 0.0) == 1.0);
  for (int i = 0; i <= 100; ++i) {
    const double b = 0.1 * i;
    CHECK(std::abs(marcum_q1(0.0, b) - std::exp(-0.5 * b * b)) <= 1e-10);
    CHECK(marcum_q1(0.5 * i, 0.0) == 1.0);
  }
  CHECK_THROWS_AS(marcum_q1(-1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(marcum_q1(1.0, -1.0), InvalidInput);
}

TEST_CASE("marcum q1 against independent oracles") {
  CHECK(std::abs(marcum_q1(1.0, 1.0) - marcum_quadrature(1.0, 1.0)) <= 1e-10);
  CHECK(std::abs(marcum_q1(1.0, 1.0) - marcum_oracle(1.0, 1.0)) <= 1e-10);

  double worst = 0.0;
  for (int i = 0; i <= 25; ++i) {
    for (int j = 0; j <= 30; ++j) {
      const double a = 2.0 * i;
      const double b = 2.0 * j + 0.3;
      worst = std::max(worst, std::abs(marcum_q1(a, b) - marcum_oracle(a, b)));
    }
  }
  CHECK(worst <= 1e-10);

  // large-a branch
  double worst_large = 0.0;
  for (double a : {50.5, 60.0, 80.0, 120.0}) {
    for (double off = -8.0; off <= 8.0; off += 0.5) {
      worst_large = std::max(worst_large, std::abs(marcum_q1(a, a + off) - marcum_oracle(a, a + off)));
    }
  }
  CHECK(worst_large <= 1e-9);
}

TEST_CASE("fading power cdf") {
  CHECK(fading_power_cdf(1.0, 0.0) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(fading_power_cdf(0.0, 0.0) == 0.0);
  for (int i = 0; i <= 200; ++i) {
    const double u = 0.1 * i;
    CHECK(std::abs(fading_power_cdf(u, 0.0) - (1.0 - std::exp(-u))) <= 1e-10);
  }
  for (double k : {0.0, 0.5, 10.0, 1000.0}) {
    CHECK(fading_power_cdf(0.0, k) == Approx(0.0).epsilon(1e-15));
    CHECK(fading_power_cdf(60.0, k) == Approx(1.0));
    double prev = -1.0;
    for (int i = 0; i <= 400; ++i) {
      const double f = fading_power_cdf(0.01 * i, k);
      // 1 - Q1 cancels in the far left tail; allow round-off there
      CHECK(f >= prev - 1e-11);
      prev = f;
    }
  }
  // concentration at 30 dB: spread about u = 1 is roughly sqrt(2 / K)
  const double k30 = 1000.0;
  CHECK(fading_power_cdf(0.85, k30) < 0.001);
  CHECK(fading_power_cdf(1.15, k30) > 0.999);
  double lo = 0.0, hi = 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fading_power_cdf(mid, k30) < 0.5 ? lo : hi) = mid;
  }
  CHECK(std::abs(lo - 1.0) < 0.01);
  CHECK(fading_power_cdf(0.999, std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(fading_power_cdf(1.0, std::numeric_limits<double>::infinity()) == 1.0);
}

TEST_CASE("fading cdf matches the empirical distribution at K = 10") {
  RandomStream rng(7, {10});
  std::vector<double> xs(1000000);
  for (auto& x : xs) x = std::norm(sample_rician(10.0, rng));
  // 1% critical value 1.628 / sqrt(n)
  CHECK(ks_statistic(xs, 10.0) < 1.628 / std::sqrt(1e6));
  const double below = static_cast<double>(std::count_if(xs.begin(), xs.end(), [](double x) { return x < 0.5; })) / 1e6;
  const double p = fading_power_cdf(0.5, 10.0);
  CHECK(std::abs(below - p) <= 4.0 * std::sqrt(p * (1 - p) / 1e6));
}

TEST_CASE("rician samples") {
  RandomStream rng(3, {0});
  for (int i = 0; i < 10; ++i) {
    CHECK(std::norm(sample_rician(std::numeric_limits<double>::infinity(), rng)) == 1.0);
  }
  for (double k : {0.0, 10.0, 1000.0}) {
    RandomStream s(42, {static_cast<std::uint64_t>(k)});
    const int n = 1000000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = std::norm(sample_rician(k, s));
      m1 += p;
      m2 += p * p;
      m4 += p * p * p * p;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    // |g|^2 = |mu + w|^2 with mu^2 = K/(K+1), E|w|^2 = 1/(K+1)
    const double mu2 = k / (k + 1), s2 = 1 / (k + 1);
    const double e2 = mu2 * mu2 + 4 * mu2 * s2 + 2 * s2 * s2;
    const double var1 = e2 - 1.0;
    CHECK(std::abs(m1 - 1.0) <= 3.0 * std::sqrt(var1 / n));
    CHECK(std::abs(m2 - e2) <= 3.0 * std::sqrt((m4 - m2 * m2) / n));
    if (k == 0.0) CHECK(std::abs(m1 - 1.0) <= 0.01);
  }
  CHECK_THROWS_AS(sample_rician(-1.0, rng), InvalidInput);
}

TEST_CASE("samples are a pure function of seed and path") {
  RandomStream a(5, {1, 2, 3});
  RandomStream b(5, {1, 2, 3});
  RandomStream c(5, {1, 2, 4});
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto ga = sample_rician(3.0, a);
    CHECK(ga == sample_rician(3.0, b));
    differs = differs || ga != sample_rician(3.0, c);
  }
  CHECK(differs);
}

TEST_CASE("snr gamma") {
  const double g = snr_gamma(0.1, db_to_linear(-60), dbm_to_watts(-109), db_to_linear(8.2));
  CHECK(linear_to_db(g) == Approx(60.8).epsilon(1e-12));
  CHECK(g == Approx(1.202e6).epsilon(1e-3));
  CHECK(snr_gamma(0.2, 1e-6, 1e-14, 2.0) == Approx(2.0 * snr_gamma(0.1, 1e-6, 1e-14, 2.0)));
  CHECK(snr_gamma(1, 1, 1, 1) == 1.0);
  CHECK_THROWS_AS(snr_gamma(0.0, 1, 1, 1), InvalidInput);
  CHECK_THROWS_AS(snr_gamma(1, 1, -1, 1), InvalidInput);

  const Scenario s = testing::default_scenario();
  CHECK(s.gamma(0) == Approx(g));
}

TEST_CASE("outage-aware rate") {
  const double g = snr_gamma(0.1, db_to_linear(-60), dbm_to_watts(-109), db_to_linear(8.2));
  const Point2 w{200, 0};
  const double r = outage_rate(1.0, g, w, w, 100, 2.0);
  CHECK(r == Approx(std::log2(1 + g / 1e4)));
  CHECK(r == Approx(6.92).epsilon(2e-3));
  CHECK(outage_rate(0.0, g, w, w, 100, 2.0) == 0.0);
  CHECK(outage_rate(0.5, g, w, w, 100, 2.0) < r);
  // doubling the distance at high SNR costs about two bits
  const double near = outage_rate(1.0, 1e12, {0, 0}, {0, 0}, 100, 2.0);
  const double far = outage_rate(1.0, 1e12, {0, 0}, {0, 0}, 200, 2.0);
  CHECK(near - far == Approx(2.0).epsilon(1e-6));
  CHECK_THROWS_AS(outage_rate(1.5, g, w, w, 100, 2.0), InvalidInput);
}

TEST_CASE("instantaneous capacity") {
  CHECK(instantaneous_capacity({1.0, 0.0}, 1.0, 1.0, 1.0, 1.0) == Approx(1.0));
  CHECK(instantaneous_capacity({0.0, 0.0}, 1e-6, 0.1, 1e-14, 2.0) == 0.0);
  const double sigma2 = dbm_to_watts(-109), gap = db_to_linear(8.2);
  const double beta = pathloss(100.0, db_to_linear(-60), 2.0);
  const double g = snr_gamma(0.1, db_to_linear(-60), sigma2, gap);
  CHECK(instantaneous_capacity({0.0, 1.0}, beta, 0.1, sigma2, gap) ==
        Approx(outage_rate(1.0, g, {0, 0}, {0, 0}, 100, 2.0)));
}

TEST_CASE("scenario invariants") {
  Scenario s = testing::default_scenario();
  CHECK_NOTHROW(s.validate());
  CHECK(s.slots == 130);
  CHECK(s.sxy == Approx(10.0));
  CHECK(s.sz == Approx(4.0));

  auto broken = [&](auto mutate) {
    Scenario t = s;
    mutate(t);
    return t;
  };
  CHECK_THROWS_AS(broken([](Scenario& t) { t.alpha = 6.5; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.alpha = 1.5; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.epsilon = 0.2; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.epsilon = 0.0; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.z0 = 50.0; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.blocks_per_slot = 0; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.sxy = 11.0; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.slots = 129; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.a2 *= 1.01; }).validate(), InvalidInput);
  CHECK_THROWS_AS(broken([](Scenario& t) { t.tx_power.clear(); }).validate(), InvalidInput);
}
