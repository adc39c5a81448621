// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "harvest/channel.hpp"

namespace harvest::testing {

// Default mission: 26 s in 0.2 s slots, (0,500,100) -> (1000,500,100).
inline Scenario default_scenario(std::vector<Point2> sensors = {{200.0, 0.0}}, double kmin_db = 0.0,
                                 double kmax_db = 30.0) {
  Scenario s;
  s.sensors = std::move(sensors);
  s.tx_power.assign(s.sensors.size(), 0.1);
  s.q0 = {0.0, 500.0};
  s.qF = {1000.0, 500.0};
  s.z0 = s.zF = 100.0;
  s.duration_s = 26.0;
  s.slots = 130;
  s.slot_s = 0.2;
  s.vxy = 50.0;
  s.vz = 20.0;
  s.min_altitude = 100.0;
  s.beta0 = db_to_linear(-60.0);
  s.alpha = 2.0;
  s.sigma2 = dbm_to_watts(-109.0);
  s.snr_gap = db_to_linear(8.2);
  s.kmin = db_to_linear(kmin_db);
  s.kmax = db_to_linear(kmax_db);
  const auto rc = rician_coeffs_from_bounds(s.kmin, s.kmax);
  s.a1 = rc.a1;
  s.a2 = rc.a2;
  s.epsilon = 0.01;
  s.derive_limits();
  return s;
}

inline std::vector<Point2> four_sensors() { return {{200, 300}, {400, 800}, {600, 200}, {850, 700}}; }

// Short mission for solver-heavy tests.
inline Scenario small_scenario(int slots, double duration_s, std::vector<Point2> sensors) {
  Scenario s = default_scenario(std::move(sensors));
  s.slots = slots;
  s.duration_s = duration_s;
  s.slot_s = duration_s / slots;
  s.q0 = {0.0, 0.0};
  s.qF = {0.8 * s.vxy * duration_s, 0.0};
  s.derive_limits();
  return s;
}

}  // namespace harvest::testing
