// SPDX-License-Identifier: Apache-2.0
#include "harvest/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "harvest/error.hpp"

namespace harvest {

using detail::require;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }
double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double Scenario::gamma(int n) const {
  return snr_gamma(tx_power.at(static_cast<std::size_t>(n)), beta0, sigma2, snr_gap);
}

void Scenario::derive_limits() {
  slot_s = duration_s / slots;
  sxy = vxy * slot_s;
  sz = vz * slot_s;
}

void Scenario::validate() const {
  require(!sensors.empty(), "scenario: at least one sensor is required");
  require(tx_power.size() == sensors.size(), "scenario: one transmit power per sensor");
  require(slots >= 1, "scenario: slot count must be positive");
  require(duration_s > 0.0 && slot_s > 0.0, "scenario: duration and slot length must be positive");
  require(std::abs(slots * slot_s - duration_s) <= 1e-9 * duration_s,
          "scenario: T must equal M * delta");
  require(std::abs(sxy - vxy * slot_s) <= 1e-9 * std::max(1.0, sxy),
          "scenario: Sxy must equal Vxy * delta");
  require(std::abs(sz - vz * slot_s) <= 1e-9 * std::max(1.0, sz), "scenario: Sz must equal Vz * delta");
  require(vxy >= 0.0 && vz >= 0.0, "scenario: speeds must be non-negative");
  require(alpha >= 2.0 && alpha <= 6.0, "scenario: pathloss exponent must lie in [2, 6]");
  require(epsilon > 0.0 && epsilon <= 0.1, "scenario: epsilon must lie in (0, 0.1]");
  require(min_altitude > 0.0, "scenario: minimum altitude H must be positive");
  require(z0 >= min_altitude && zF >= min_altitude, "scenario: endpoint altitudes must be >= H");
  require(blocks_per_slot >= 1, "scenario: L must be >= 1");
  require(beta0 > 0.0 && sigma2 > 0.0 && snr_gap > 0.0, "scenario: channel constants must be positive");
  for (double p : tx_power) require(p > 0.0, "scenario: transmit powers must be positive");
  require(kmin > 0.0 && kmin <= kmax, "scenario: need 0 < Kmin <= Kmax");
  require(std::abs(kmin - a1) <= 1e-9 * kmin, "scenario: Kmin must equal A1");
  const double kmax_model = a1 * std::exp(a2 * std::numbers::pi / 2.0);
  require(std::abs(kmax - kmax_model) <= 1e-9 * kmax, "scenario: Kmax must equal A1 exp(A2 pi/2)");
}

double distance(const Point2& q, const Point2& w, double z) {
  require(z > 0.0, "distance: altitude must be positive");
  return std::sqrt((q - w).squaredNorm() + z * z);
}

double pathloss(double d, double beta0, double alpha) {
  require(d >= 1.0, "pathloss: distance below the 1 m reference");
  return beta0 * std::pow(d, -alpha);
}

double elevation_angle(const Point2& q, const Point2& w, double z) {
  return std::asin(angle_indicator(q, w, z));
}

double angle_indicator(const Point2& q, const Point2& w, double z) {
  return z / distance(q, w, z);
}

double rician_factor(double theta, double a1, double a2) {
  require(theta >= 0.0 && theta <= std::numbers::pi / 2.0 + 1e-15,
          "rician_factor: elevation angle outside [0, pi/2]");
  return a1 * std::exp(a2 * theta);
}

RicianCoefficients rician_coeffs_from_bounds(double kmin, double kmax) {
  require(kmin > 0.0 && kmax >= kmin, "rician_coeffs_from_bounds: need 0 < Kmin <= Kmax");
  return {kmin, 2.0 / std::numbers::pi * std::log(kmax / kmin)};
}

double gaussian_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace {

struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Golub-Welsch for the physicists' Hermite weight exp(-x^2).
const HermiteRule& hermite_rule() {
  static const HermiteRule rule = [] {
    constexpr int n = 80;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    HermiteRule r;
    for (int i = 0; i < n; ++i) {
      r.nodes.push_back(eig.eigenvalues()(i));
      const double v0 = eig.eigenvectors()(0, i);
      r.weights.push_back(std::sqrt(std::numbers::pi) * v0 * v0);
    }
    return r;
  }();
  return rule;
}

// Poisson mixture of chi-square tails. Weights are walked outward from the
// mode in log space so nothing underflows for a up to ~50.
double marcum_series(double a, double b) {
  const double lam = 0.5 * a * a;
  const double x = 0.5 * b * b;
  const double log_x = std::log(x);
  const auto k0 = static_cast<long>(std::floor(lam));

  // log of Poisson(j; x) for j = 0..k0+1
  std::vector<double> log_px(static_cast<std::size_t>(k0) + 2);
  log_px[0] = -x;
  for (long j = 1; j <= k0 + 1; ++j) log_px[j] = log_px[j - 1] + log_x - std::log(double(j));

  double g0 = 0.0;  // P(Poisson(x) <= k0)
  for (long j = 0; j <= k0; ++j) g0 += std::exp(log_px[j]);
  g0 = std::min(g0, 1.0);

  const double p0 = std::exp(-lam + k0 * std::log(lam) - std::lgamma(k0 + 1.0));
  double sum = p0 * g0;

  constexpr double kTail = 1e-17;
  // upward
  {
    double p = p0;
    double g = g0;
    double log_t = log_px[k0];
    for (long k = k0 + 1;; ++k) {
      p *= lam / k;
      log_t += log_x - std::log(double(k));
      g = std::min(1.0, g + std::exp(log_t));
      sum += p * g;
      const double r = lam / (k + 1.0);
      if (r < 1.0 && p * r / (1.0 - r) < kTail) break;
      if (k > k0 + 100000) break;
    }
  }
  // downward
  {
    double p = p0;
    double g = g0;
    for (long k = k0 - 1; k >= 0; --k) {
      p *= (k + 1.0) / lam;
      g = std::max(0.0, g - std::exp(log_px[k + 1]));
      sum += p * g;
      const double r = k / lam;
      if (r < 1.0 && p * r / (1.0 - r) < kTail) break;
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

// Large noncentrality: condition on the quadrature component of the noise,
// P(|a + n| > b) = E_t[ Q(c - a) + Q(c + a) ], c = sqrt(b^2 - t^2).
double marcum_large_a(double a, double b) {
  if (a - b >= 12.0) return 1.0;
  if (b - a >= 12.0) return 0.0;
  const auto& rule = hermite_rule();
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double t = std::numbers::sqrt2 * rule.nodes[i];
    const double c2 = b * b - t * t;
    const double h = c2 <= 0.0 ? 1.0 : gaussian_q(std::sqrt(c2) - a) + gaussian_q(std::sqrt(c2) + a);
    sum += rule.weights[i] * h;
  }
  return std::clamp(sum / std::sqrt(std::numbers::pi), 0.0, 1.0);
}

}  // namespace

double marcum_q1(double a, double b) {
  require(a >= 0.0 && b >= 0.0, "marcum_q1: arguments must be non-negative");
  if (b == 0.0) return 1.0;
  if (a == 0.0) return std::exp(-0.5 * b * b);
  if (a > 50.0) return marcum_large_a(a, b);
  return marcum_series(a, b);
}

double fading_power_cdf(double u, double k) {
  require(u >= 0.0 && k >= 0.0, "fading_power_cdf: need u >= 0 and K >= 0");
  if (std::isinf(k)) return u < 1.0 ? 0.0 : 1.0;
  if (k == 0.0) return -std::expm1(-u);
  return 1.0 - marcum_q1(std::sqrt(2.0 * k), std::sqrt(2.0 * (k + 1.0) * u));
}

std::complex<double> sample_rician(double k, RandomStream& stream) {
  require(k >= 0.0, "sample_rician: K must be non-negative");
  if (std::isinf(k)) return {1.0, 0.0};
  double re = 0.0;
  double im = 0.0;
  stream.normal_pair(re, im);
  const double los = std::sqrt(k / (k + 1.0));
  const double scatter = std::sqrt(1.0 / (k + 1.0)) / std::numbers::sqrt2;
  return {los + scatter * re, scatter * im};
}

double snr_gamma(double power, double beta0, double sigma2, double snr_gap) {
  require(power > 0.0 && beta0 > 0.0 && sigma2 > 0.0 && snr_gap > 0.0,
          "snr_gamma: all inputs must be positive");
  return power * beta0 / (sigma2 * snr_gap);
}

double outage_rate(double f, double gamma, const Point2& q, const Point2& w, double z, double alpha) {
  require(f >= 0.0 && f <= 1.0, "outage_rate: effective fading power must lie in [0, 1]");
  const double y = (q - w).squaredNorm() + z * z;
  return std::log2(1.0 + f * gamma / std::pow(y, alpha / 2.0));
}

double instantaneous_capacity(std::complex<double> g, double beta, double power, double sigma2,
                              double snr_gap) {
  return std::log2(1.0 + std::norm(g) * beta * power / (sigma2 * snr_gap));
}

}  // namespace harvest
