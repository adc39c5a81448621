// SPDX-License-Identifier: Apache-2.0
#include "harvest/effective_fading.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "harvest/channel.hpp"
#include "harvest/error.hpp"

namespace harvest {

using detail::require;

LogisticModel LogisticModel::line_of_sight() {
  LogisticModel m;
  m.b1 = 0.0;
  m.b2 = 0.0;
  m.c1 = 1.0;
  m.c2 = 0.0;
  return m;
}

double inverse_q(double p) {
  require(p > 0.0 && p < 1.0, "inverse_q: probability must lie in (0, 1)");
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double exact_effective_power(double k, double eps) {
  require(k >= 0.0, "exact_effective_power: K must be non-negative");
  require(eps > 0.0 && eps <= 0.1, "exact_effective_power: eps must lie in (0, 0.1]");
  // exponential power: the quantile is closed form
  if (k == 0.0) return -std::log1p(-eps);
  if (fading_power_cdf(1.0, k) < eps) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fading_power_cdf(mid, k) < eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double lemma1_w_low(double k, double eps) {
  return std::sqrt(-2.0 * std::log1p(-eps)) * std::exp(0.5 * k);
}

double lemma1_w_high(double k, double eps) {
  const double qi = inverse_q(eps);
  const double a = std::sqrt(2.0 * k);
  require(a > qi, "lemma1_w_high: requires sqrt(2K) > Q^{-1}(eps)");
  return a + std::log(a / (a - qi)) / (2.0 * qi) - qi;
}

double k_threshold(double eps) {
  require(eps > 0.0 && eps <= 0.1, "k_threshold: eps must lie in (0, 0.1]");
  const double qi = inverse_q(eps);
  const double k_edge = 0.5 * qi * qi;
  auto gap = [&](double k) { return lemma1_w_low(k, eps) - lemma1_w_high(k, eps); };

  // Just above the domain edge the high branch diverges, so gap < 0. Walk
  // outward until the exponential low branch overtakes it.
  double lo = k_edge * (1.0 + 1e-9) + 1e-12;
  double hi = lo;
  const double step = 0.01 * std::max(1.0, k_edge);
  bool found = false;
  for (int i = 0; i < 20000; ++i) {
    hi = lo + step;
    if (gap(hi) > 0.0) {
      found = true;
      break;
    }
    lo = hi;
  }
  if (!found || gap(lo) > 0.0) {
    throw NumericalError("k_threshold: no branch intersection in search bracket");
  }
  while (hi - lo > 1e-13 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (gap(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::sqrt(2.0 * 0.5 * (lo + hi));
}

double lemma1_effective_power(double k, double eps) {
  require(k >= 0.0, "lemma1_effective_power: K must be non-negative");
  require(eps > 0.0 && eps <= 0.1, "lemma1_effective_power: eps must lie in (0, 0.1]");
  const double kth = k_threshold(eps);
  double f;
  if (k <= 0.5 * kth * kth) {
    // w_low^2 / (2 (K + 1)) without the square root round trip
    f = -std::log1p(-eps) * std::exp(k) / (k + 1.0);
  } else {
    const double w = lemma1_w_high(k, eps);
    f = w * w / (2.0 * (k + 1.0));
  }
  return std::clamp(f, std::numeric_limits<double>::min(), 1.0);
}

std::vector<RegressionSample> generate_regression_samples(double kmin, double kmax, double eps,
                                                          int grid_size) {
  require(grid_size >= 50, "generate_regression_samples: grid_size must be >= 50");
  const auto [a1, a2] = rician_coeffs_from_bounds(kmin, kmax);
  std::vector<RegressionSample> out;
  out.reserve(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    const double v = static_cast<double>(i) / (grid_size - 1);
    const double theta = std::min(std::asin(v), std::numbers::pi / 2.0);
    out.push_back({v, exact_effective_power(rician_factor(theta, a1, a2), eps)});
  }
  return out;
}

double logistic_effective_power(const LogisticModel& model, double v) {
  require(v >= -1e-12 && v <= 1.0 + 1e-12, "logistic_effective_power: v must lie in [0, 1]");
  return model.c1 + model.c2 / (1.0 + std::exp(-(model.b1 + model.b2 * v)));
}

namespace {

using Params = std::array<double, 3>;  // b1, b2, c1

struct SimplexResult {
  Params x;
  double f;
  bool converged;
};

SimplexResult nelder_mead(const std::function<double(const Params&)>& fn, Params start,
                          const Params& step, int max_evals) {
  std::array<Params, 4> pts;
  std::array<double, 4> val;
  pts[0] = start;
  for (int i = 0; i < 3; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += step[i];
  }
  int evals = 0;
  auto eval = [&](const Params& p) {
    ++evals;
    return fn(p);
  };
  for (int i = 0; i < 4; ++i) val[i] = eval(pts[i]);

  std::array<int, 4> order{0, 1, 2, 3};
  while (true) {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return val[a] < val[b] || (val[a] == val[b] && a < b);
    });
    const int best = order[0];
    const int worst = order[3];
    const int second = order[2];

    double diam = 0.0;
    for (int i = 1; i < 4; ++i) {
      for (int d = 0; d < 3; ++d) {
        diam = std::max(diam, std::abs(pts[order[i]][d] - pts[best][d]) /
                                  (1.0 + std::abs(pts[best][d])));
      }
    }
    const double spread = val[worst] - val[best];
    if (spread <= 1e-10 * val[best] + 1e-30 && diam <= 1e-9) {
      return {pts[best], val[best], true};
    }
    if (evals >= max_evals) return {pts[best], val[best], false};

    Params centroid{0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      for (int d = 0; d < 3; ++d) centroid[d] += pts[order[i]][d] / 3.0;
    }
    auto along = [&](double t) {
      Params p;
      for (int d = 0; d < 3; ++d) p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
      return p;
    };
    const Params refl = along(-1.0);
    const double f_refl = eval(refl);
    if (f_refl < val[best]) {
      const Params expd = along(-2.0);
      const double f_expd = eval(expd);
      if (f_expd < f_refl) {
        pts[worst] = expd;
        val[worst] = f_expd;
      } else {
        pts[worst] = refl;
        val[worst] = f_refl;
      }
      continue;
    }
    if (f_refl < val[second]) {
      pts[worst] = refl;
      val[worst] = f_refl;
      continue;
    }
    const bool outside = f_refl < val[worst];
    const Params contr = along(outside ? -0.5 : 0.5);
    const double f_contr = eval(contr);
    if (f_contr < (outside ? f_refl : val[worst])) {
      pts[worst] = contr;
      val[worst] = f_contr;
      continue;
    }
    for (int i = 1; i < 4; ++i) {
      const int j = order[i];
      for (int d = 0; d < 3; ++d) pts[j][d] = pts[best][d] + 0.5 * (pts[j][d] - pts[best][d]);
      val[j] = eval(pts[j]);
    }
  }
}

}  // namespace

LogisticModel fit_logistic(const std::vector<RegressionSample>& samples) {
  require(samples.size() >= 50, "fit_logistic: at least 50 samples are required");
  double vmin = samples.front().v;
  double vmax = samples.front().v;
  double fmin = samples.front().f;
  double fmax = samples.front().f;
  for (const auto& s : samples) {
    vmin = std::min(vmin, s.v);
    vmax = std::max(vmax, s.v);
    fmin = std::min(fmin, s.f);
    fmax = std::max(fmax, s.f);
  }
  require(vmin <= 0.05 && vmax >= 0.95, "fit_logistic: samples must span v in [0, 1]");

  LogisticModel model;
  model.grid = static_cast<int>(samples.size());

  // Constant data: any (b1, c1) pair on a level set fits; pick b2 = 0, c1 = 0.
  if (fmax - fmin <= 1e-12) {
    const double f0 = 0.5 * (fmin + fmax);
    if (f0 >= 1.0) {
      model.b1 = 0.0;
      model.c1 = 1.0;
    } else {
      model.b1 = std::log(f0 / (1.0 - f0));
      model.c1 = 0.0;
    }
    model.b2 = 0.0;
    model.c2 = 1.0 - model.c1;
    model.rmse = 0.0;
    return model;
  }

  auto mse = [&](const Params& p) {
    const double c1 = std::clamp(p[2], 0.0, 1.0);
    double acc = 0.0;
    for (const auto& s : samples) {
      const double pred = c1 + (1.0 - c1) / (1.0 + std::exp(-(p[0] + p[1] * s.v)));
      acc += (pred - s.f) * (pred - s.f);
    }
    // keeps the simplex from drifting along the flat direction past the box
    const double excess = p[2] - c1;
    return acc / static_cast<double>(samples.size()) + excess * excess;
  };

  // coarse multi-start grid
  std::vector<std::pair<double, Params>> starts;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      for (int k = 0; k <= 5; ++k) {
        const Params p{-10.0 + i, 2.0 * j, 0.1 * k};
        starts.emplace_back(mse(p), p);
      }
    }
  }
  std::stable_sort(starts.begin(), starts.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  SimplexResult best{starts.front().second, starts.front().first, false};
  for (std::size_t s = 0; s < std::min<std::size_t>(4, starts.size()); ++s) {
    SimplexResult r = nelder_mead(mse, starts[s].second, {0.5, 0.5, 0.05}, 20000);
    // restarts shake loose premature collapse
    for (int restart = 0; restart < 3; ++restart) {
      SimplexResult again = nelder_mead(mse, r.x, {0.05, 0.05, 0.01}, 20000);
      const bool same = std::abs(again.f - r.f) <= 1e-10 * r.f + 1e-30;
      r = again.f <= r.f ? again : r;
      if (same && again.converged) break;
    }
    if (s == 0 || r.f < best.f) best = r;
  }

  model.b1 = best.x[0];
  model.b2 = best.x[1];
  model.c1 = std::clamp(best.x[2], 0.0, 1.0);
  model.c2 = 1.0 - model.c1;
  {
    double acc = 0.0;
    for (const auto& s : samples) {
      const double e = logistic_effective_power(model, s.v) - s.f;
      acc += e * e;
    }
    model.rmse = std::sqrt(acc / static_cast<double>(samples.size()));
  }
  if (!best.converged) throw FitError("fit_logistic: simplex refinement did not converge", model);
  return model;
}

LogisticModel fit_logistic_for(double kmin_db, double kmax_db, double eps, int grid_size) {
  require(kmin_db <= kmax_db, "fit_logistic_for: kmin_db must not exceed kmax_db");
  auto model = fit_logistic(
      generate_regression_samples(db_to_linear(kmin_db), db_to_linear(kmax_db), eps, grid_size));
  model.kmin_db = kmin_db;
  model.kmax_db = kmax_db;
  model.epsilon = eps;
  return model;
}

}  // namespace harvest
