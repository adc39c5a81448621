// SPDX-License-Identifier: Apache-2.0
//
// Effective fading power: the |g|^2 quantile that meets a target outage
// probability. Three routes are provided: exact inversion of the Rician cdf,
// a closed-form approximation built on an inverse Marcum-Q approximation, and
// a fitted logistic curve in the angle indicator v = sin(elevation).

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace harvest {

/// f(v) = c1 + c2 / (1 + exp(-(b1 + b2 v))), with c1 + c2 = 1.
struct LogisticModel {
  double b1 = 0.0;
  double b2 = 0.0;
  double c1 = 1.0;
  double c2 = 0.0;
  // provenance of the fit
  double kmin_db = 0.0;
  double kmax_db = 0.0;
  double epsilon = 0.0;
  double rmse = 0.0;
  int grid = 0;

  /// f identically one; the deterministic line-of-sight channel.
  static LogisticModel line_of_sight();
  /// True when the curve does not depend on v (B2 == 0 or C2 == 0).
  [[nodiscard]] bool flat() const { return b2 == 0.0 || c2 == 0.0; }
};

struct RegressionSample {
  double v;
  double f;
};

/// Thrown by fit_logistic when refinement does not converge; carries the best
/// parameters found so far.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, LogisticModel best)
      : std::runtime_error(what), best_(best) {}
  [[nodiscard]] const LogisticModel& best() const { return best_; }

 private:
  LogisticModel best_;
};

/// Q^{-1}(p) for the standard Gaussian upper tail.
double inverse_q(double p);

/// Unique u in [0, 1] with F(u) = eps, or 1 when F(1) < eps.
double exact_effective_power(double k, double eps);

/// The value sqrt(2 K*) where K* is the intersection of the two branches of
/// the closed-form approximation on sqrt(2K) > Q^{-1}(eps). The low branch
/// applies for K <= K_th^2 / 2.
double k_threshold(double eps);

/// Closed-form approximation f_bar = w^2 / (2 (K + 1)), clamped to (0, 1].
double lemma1_effective_power(double k, double eps);

/// The two branch values of w at a given K; exposed for continuity checks.
double lemma1_w_low(double k, double eps);
double lemma1_w_high(double k, double eps);

/// Uniform v-grid on [0, 1] with exact f at K = Kmin exp(A2 asin v).
std::vector<RegressionSample> generate_regression_samples(double kmin, double kmax, double eps,
                                                          int grid_size);

/// Minimum-MSE logistic fit with c2 = 1 - c1, c1 in [0, 1]. Metadata fields
/// other than rmse and grid are left for the caller.
LogisticModel fit_logistic(const std::vector<RegressionSample>& samples);

/// Convenience: sample + fit + fill provenance.
LogisticModel fit_logistic_for(double kmin_db, double kmax_db, double eps, int grid_size = 200);

double logistic_effective_power(const LogisticModel& model, double v);

}  // namespace harvest
