// SPDX-License-Identifier: Apache-2.0
//
// Geometry and channel mathematics for a UAV collecting data from ground
// sensor nodes over angle-dependent Rician fading links. Everything here is a
// pure function of its arguments; random sampling takes an explicit stream.

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "harvest/random.hpp"

namespace harvest {

using Point2 = Eigen::Vector2d;

/// Full problem instance. All channel quantities are linear scale; dB inputs
/// are converted once when a scenario file is loaded.
struct Scenario {
  std::vector<Point2> sensors;  ///< horizontal SN positions w_n (m)
  Point2 q0{0.0, 0.0};
  Point2 qF{0.0, 0.0};
  double z0 = 100.0;
  double zF = 100.0;

  double duration_s = 26.0;  ///< T
  int slots = 130;           ///< M
  double slot_s = 0.2;       ///< delta = T / M
  double vxy = 50.0;
  double vz = 20.0;
  double sxy = 10.0;  ///< per-slot horizontal displacement limit, vxy * delta
  double sz = 4.0;    ///< per-slot vertical displacement limit, vz * delta
  double min_altitude = 100.0;  ///< H

  double beta0 = 1e-6;   ///< reference gain at 1 m
  double alpha = 2.0;    ///< pathloss exponent
  double sigma2 = 0.0;   ///< noise power (W)
  double snr_gap = 1.0;  ///< Gamma
  std::vector<double> tx_power;  ///< P_n (W), one per sensor

  double a1 = 1.0;  ///< Rician factor at zero elevation
  double a2 = 0.0;  ///< exponential growth rate of the Rician factor
  double kmin = 1.0;
  double kmax = 1.0;
  double epsilon = 0.01;
  int blocks_per_slot = 10;  ///< L, used by Monte-Carlo only
  std::uint64_t seed = 20190101;

  [[nodiscard]] int num_sensors() const { return static_cast<int>(sensors.size()); }
  /// gamma_n = P_n beta0 / (sigma2 Gamma)
  [[nodiscard]] double gamma(int n) const;

  /// Recomputes delta/Sxy/Sz from T, M and the speeds.
  void derive_limits();
  /// Throws InvalidInput when an invariant is broken.
  void validate() const;
};

double db_to_linear(double db);
double linear_to_db(double linear);
double dbm_to_watts(double dbm);

// --- geometry -------------------------------------------------------------

double distance(const Point2& q, const Point2& w, double z);
double pathloss(double d, double beta0, double alpha);
double elevation_angle(const Point2& q, const Point2& w, double z);
/// v = sin(theta) = z / d
double angle_indicator(const Point2& q, const Point2& w, double z);

// --- Rician factor ----------------------------------------------------------

struct RicianCoefficients {
  double a1;
  double a2;
};

double rician_factor(double theta, double a1, double a2);
RicianCoefficients rician_coeffs_from_bounds(double kmin, double kmax);

// --- fading statistics ------------------------------------------------------

/// First-order Marcum Q function Q1(a, b).
double marcum_q1(double a, double b);
/// Gaussian upper tail Q(x).
double gaussian_q(double x);
/// cdf of |g|^2 for unit-power Rician fading with factor K. K may be +inf.
double fading_power_cdf(double u, double k);
/// One draw of g = sqrt(K/(K+1)) + sqrt(1/(K+1)) * CN(0,1); K may be +inf.
std::complex<double> sample_rician(double k, RandomStream& stream);

// --- rates ------------------------------------------------------------------

double snr_gamma(double power, double beta0, double sigma2, double snr_gap);
/// log2(1 + f gamma / (||q-w||^2 + z^2)^(alpha/2))
double outage_rate(double f, double gamma, const Point2& q, const Point2& w, double z,
                   double alpha);
/// log2(1 + |g|^2 beta P / (sigma2 Gamma))
double instantaneous_capacity(std::complex<double> g, double beta, double power, double sigma2,
                              double snr_gap);

}  // namespace harvest
