// SPDX-License-Identifier: Apache-2.0
#include "harvest/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "harvest/error.hpp"
#include "harvest/linear_program.hpp"

namespace harvest {

using detail::require;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kActive = 1e-6;    // schedule weight below which a slot is ignored
constexpr double kSBackoff = 1e-4;  // interior margin for s at the start point
constexpr double kEtaBackoff = 1e-6;
constexpr double kBlend = 1e-6;     // pull toward the straight line when a speed limit is tight
const double kLog2e = std::numbers::log2e;

}  // namespace

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::lb: return "lb";
    case Scheme::rfla: return "rfla";
    case Scheme::rffsa: return "rffsa";
    case Scheme::rfb: return "rfb";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "lb") return Scheme::lb;
  if (name == "rfla") return Scheme::rfla;
  if (name == "rffsa") return Scheme::rffsa;
  if (name == "rfb") return Scheme::rfb;
  throw InvalidInput("unknown scheme '" + name + "' (expected lb, rfla, rffsa or rfb)");
}

void check_reachable(const Scenario& scenario) {
  const int m_slots = scenario.slots;
  const double span_xy = (scenario.qF - scenario.q0).norm();
  const double span_z = std::abs(scenario.zF - scenario.z0);
  if (span_xy > scenario.sxy * m_slots * (1.0 + 1e-12) + 1e-9) {
    std::ostringstream msg;
    msg << "endpoints unreachable horizontally: need T >= " << span_xy / scenario.vxy << " s";
    throw InvalidInput(msg.str());
  }
  if (span_z > scenario.sz * m_slots * (1.0 + 1e-12) + 1e-9) {
    std::ostringstream msg;
    msg << "endpoints unreachable vertically: need T >= "
        << (scenario.vz > 0.0 ? span_z / scenario.vz : std::numeric_limits<double>::infinity()) << " s";
    throw InvalidInput(msg.str());
  }
}

Plan initialize_plan(const Scenario& scenario) {
  scenario.validate();
  check_reachable(scenario);
  const int m_slots = scenario.slots;
  Plan plan;
  plan.q.resize(static_cast<std::size_t>(m_slots) + 1);
  plan.z.resize(static_cast<std::size_t>(m_slots) + 1);
  for (int m = 0; m <= m_slots; ++m) {
    const double t = static_cast<double>(m) / m_slots;
    plan.q[static_cast<std::size_t>(m)] = scenario.q0 + t * (scenario.qF - scenario.q0);
    plan.z[static_cast<std::size_t>(m)] = scenario.z0 + t * (scenario.zF - scenario.z0);
  }
  plan.q.front() = scenario.q0;
  plan.q.back() = scenario.qF;
  plan.z.front() = scenario.z0;
  plan.z.back() = scenario.zF;
  plan.a = MatrixXd::Constant(m_slots, scenario.num_sensors(), 1.0 / scenario.num_sensors());
  return plan;
}

std::vector<double> fixed_altitude_profile(const Scenario& scenario, double h) {
  const int m_slots = scenario.slots;
  std::vector<double> z(static_cast<std::size_t>(m_slots) + 1);
  const double target = std::max(h, scenario.min_altitude);
  for (int m = 0; m <= m_slots; ++m) {
    const double lo = std::max(scenario.z0 - m * scenario.sz, scenario.zF - (m_slots - m) * scenario.sz);
    const double hi = std::min(scenario.z0 + m * scenario.sz, scenario.zF + (m_slots - m) * scenario.sz);
    z[static_cast<std::size_t>(m)] = std::max(std::clamp(target, lo, std::max(lo, hi)), scenario.min_altitude);
  }
  z.front() = scenario.z0;
  z.back() = scenario.zF;
  return z;
}

double approx_rate(const LogisticModel& model, double gamma, const Point2& q, const Point2& w,
                   double z, double alpha) {
  const double f = logistic_effective_power(model, angle_indicator(q, w, z));
  return outage_rate(f, gamma, q, w, z, alpha);
}

MatrixXd rate_matrix(const std::vector<Point2>& q, const std::vector<double>& z,
                     const Scenario& scenario, const LogisticModel& model) {
  const int m_slots = scenario.slots;
  const int n_sn = scenario.num_sensors();
  require(q.size() == static_cast<std::size_t>(m_slots) + 1 && z.size() == q.size(),
          "rate_matrix: trajectory must have M + 1 points");
  MatrixXd r(m_slots, n_sn);
  for (int m = 0; m < m_slots; ++m) {
    for (int n = 0; n < n_sn; ++n) {
      r(m, n) = approx_rate(model, scenario.gamma(n), q[static_cast<std::size_t>(m)],
                            scenario.sensors[static_cast<std::size_t>(n)], z[static_cast<std::size_t>(m)],
                            scenario.alpha);
    }
  }
  return r;
}

double max_min_rate(const MatrixXd& a, const MatrixXd& rates) {
  require(a.rows() == rates.rows() && a.cols() == rates.cols(), "max_min_rate: shape mismatch");
  const VectorXd avg = (a.array() * rates.array()).colwise().sum().transpose() / static_cast<double>(a.rows());
  return avg.minCoeff();
}

double plan_objective(const Plan& plan, const Scenario& scenario, const LogisticModel& model) {
  return max_min_rate(plan.a, rate_matrix(plan.q, plan.z, scenario, model));
}

SCACoefficients horizontal_coefficients(const LogisticModel& model, double gamma,
                                        const Point2& q_hat, const Point2& w, double z,
                                        double alpha) {
  require(z > 0.0, "horizontal_coefficients: altitude must be positive");
  SCACoefficients c;
  const double y = (q_hat - w).squaredNorm() + z * z;
  const double ya = std::pow(y, alpha / 2.0);
  c.v_hat = z / std::sqrt(y);
  c.lambda_hat = z / (2.0 * y * std::sqrt(y));
  c.s_hat = model.b1 + model.b2 * c.v_hat;
  const double x = 1.0 + std::exp(-c.s_hat);
  const double num = model.c1 * x + model.c2;
  const double den = x * ya + gamma * num;
  c.r_hat = std::log2(1.0 + (model.c1 + model.c2 / x) * gamma / ya);
  c.phi_hat = kLog2e * gamma * model.c2 / (x * den);
  c.psi_hat = kLog2e * (alpha / 2.0) * gamma * num / (y * den);
  return c;
}

VBound v_bound_coefficients(const Point2& q_hat, const Point2& w, double z) {
  require(z > 0.0, "v_bound_coefficients: altitude must be positive");
  const double y = (q_hat - w).squaredNorm() + z * z;
  return {z / std::sqrt(y), z / (2.0 * y * std::sqrt(y))};
}

double rate_lower_bound(const SCACoefficients& c, double s, const Point2& q, const Point2& q_hat,
                        const Point2& w) {
  return c.r_hat - c.phi_hat * (std::exp(-s) - std::exp(-c.s_hat)) -
         c.psi_hat * ((q - w).squaredNorm() - (q_hat - w).squaredNorm());
}

MatrixXd solve_scheduling(const Plan& plan, const Scenario& scenario, const LogisticModel& model) {
  const MatrixXd rates = rate_matrix(plan.q, plan.z, scenario, model);
  const Index m_slots = rates.rows();
  const Index n_sn = rates.cols();
  const Index nv = m_slots * n_sn + 1;
  const Index eta = nv - 1;

  LinearProgram lp;
  lp.objective = VectorXd::Zero(nv);
  lp.objective(eta) = 1.0;
  lp.a_ub = MatrixXd::Zero(m_slots + n_sn, nv);
  lp.b_ub = VectorXd::Zero(m_slots + n_sn);
  for (Index m = 0; m < m_slots; ++m) {
    for (Index n = 0; n < n_sn; ++n) lp.a_ub(m, m * n_sn + n) = 1.0;
    lp.b_ub(m) = 1.0;
  }
  for (Index n = 0; n < n_sn; ++n) {
    lp.a_ub(m_slots + n, eta) = 1.0;
    for (Index m = 0; m < m_slots; ++m) lp.a_ub(m_slots + n, m * n_sn + n) = -rates(m, n) / static_cast<double>(m_slots);
  }
  // a <= 1 follows from the slot rows
  lp.lower = VectorXd::Zero(nv);
  lp.upper = VectorXd::Constant(nv, std::numeric_limits<double>::infinity());

  const LpReport rep = solve_lp(lp);
  if (rep.status != SolverStatus::optimal) {
    throw NumericalError("solve_scheduling: LP returned " + to_string(rep.status));
  }
  MatrixXd a(m_slots, n_sn);
  for (Index m = 0; m < m_slots; ++m) {
    for (Index n = 0; n < n_sn; ++n) a(m, n) = std::clamp(rep.x(m * n_sn + n), 0.0, 1.0);
    const double used = a.row(m).sum();
    if (used > 1.0) {
      a.row(m) /= used;
    } else if (used < 1.0) {
      Index best = 0;
      rates.row(m).maxCoeff(&best);
      a(m, best) += 1.0 - used;
    }
  }
  return a;
}

namespace {

struct RateTerm {
  double weight;  // a / M
  SCACoefficients c;
  double d_hat;   // squared horizontal distance at the expansion point
  Point2 w;
  double z_hat;   // vertical block only
  Index local;    // first local index of this term's variables
  bool has_s;
};

// sum_terms weight * R_lb - eta; local layout [eta, per term: position vars, s?]
double eval_rate_horizontal(const std::vector<RateTerm>& terms, const VectorXd& x, VectorXd* grad,
                            std::vector<Triplet>* hess) {
  double g = -x(0);
  if (grad != nullptr) {
    grad->setZero(x.size());
    (*grad)(0) = -1.0;
  }
  for (const auto& t : terms) {
    const Point2 q(x(t.local), x(t.local + 1));
    const Point2 diff = q - t.w;
    double val = t.c.r_hat - t.c.psi_hat * (diff.squaredNorm() - t.d_hat);
    if (t.has_s) {
      const double es = std::exp(-x(t.local + 2));
      val -= t.c.phi_hat * (es - std::exp(-t.c.s_hat));
      if (grad != nullptr) (*grad)(t.local + 2) = t.weight * t.c.phi_hat * es;
      if (hess != nullptr) hess->emplace_back(t.local + 2, t.local + 2, -t.weight * t.c.phi_hat * es);
    }
    g += t.weight * val;
    if (grad != nullptr) {
      (*grad)(t.local) = -2.0 * t.weight * t.c.psi_hat * diff.x();
      (*grad)(t.local + 1) = -2.0 * t.weight * t.c.psi_hat * diff.y();
    }
    if (hess != nullptr) {
      hess->emplace_back(t.local, t.local, -2.0 * t.weight * t.c.psi_hat);
      hess->emplace_back(t.local + 1, t.local + 1, -2.0 * t.weight * t.c.psi_hat);
    }
  }
  return g;
}

// layout [eta, per term: z, s?]; horizontal offset enters through d_hat
double eval_rate_vertical(const std::vector<RateTerm>& terms, const VectorXd& x, VectorXd* grad,
                          std::vector<Triplet>* hess) {
  double g = -x(0);
  if (grad != nullptr) {
    grad->setZero(x.size());
    (*grad)(0) = -1.0;
  }
  for (const auto& t : terms) {
    const double z = x(t.local);
    double val = t.c.r_hat - t.c.psi_hat * (z * z - t.z_hat * t.z_hat);
    if (t.has_s) {
      const double es = std::exp(-x(t.local + 1));
      val -= t.c.phi_hat * (es - std::exp(-t.c.s_hat));
      if (grad != nullptr) (*grad)(t.local + 1) = t.weight * t.c.phi_hat * es;
      if (hess != nullptr) hess->emplace_back(t.local + 1, t.local + 1, -t.weight * t.c.phi_hat * es);
    }
    g += t.weight * val;
    if (grad != nullptr) (*grad)(t.local) = -2.0 * t.weight * t.c.psi_hat * z;
    if (hess != nullptr) hess->emplace_back(t.local, t.local, -2.0 * t.weight * t.c.psi_hat);
  }
  return g;
}

double eta_ceiling(const Scenario& scenario) {
  double best = 0.0;
  for (int n = 0; n < scenario.num_sensors(); ++n) {
    best = std::max(best, std::log2(1.0 + scenario.gamma(n) / std::pow(scenario.min_altitude, scenario.alpha)));
  }
  return best + 1.0;
}

void check_block_inputs(const Plan& plan, const Scenario& scenario, const LogisticModel& model) {
  require(plan.q.size() == static_cast<std::size_t>(scenario.slots) + 1 && plan.z.size() == plan.q.size(),
          "planner: trajectory must have M + 1 points");
  require(plan.a.rows() == scenario.slots && plan.a.cols() == scenario.num_sensors(),
          "planner: schedule must be M x N");
  require(model.flat() || model.b2 >= 0.0, "planner: logistic slope B2 must be non-negative");
}

}  // namespace

BlockStep solve_horizontal(const Plan& plan, const Scenario& scenario, const LogisticModel& model,
                           const SchemeOptions& options) {
  check_block_inputs(plan, scenario, model);
  const int m_slots = scenario.slots;
  const int n_sn = scenario.num_sensors();
  const bool use_s = !model.flat();
  const auto qi = [](int m, int d) { return static_cast<Index>(2 * m + d); };

  Eigen::MatrixXi s_idx = Eigen::MatrixXi::Constant(m_slots, n_sn, -1);
  Index next = 2 * (m_slots + 1);
  for (int m = 0; m < m_slots; ++m) {
    for (int n = 0; n < n_sn; ++n) {
      if (use_s && (options.dense_s || plan.a(m, n) > kActive)) s_idx(m, n) = static_cast<int>(next++);
    }
  }
  const Index eta = next;
  ConcaveProgram cp(eta + 1);
  cp.objective(eta) = 1.0;
  cp.upper(eta) = eta_ceiling(scenario);
  for (int d = 0; d < 2; ++d) {
    cp.pins.emplace_back(qi(0, d), scenario.q0(d));
    cp.pins.emplace_back(qi(m_slots, d), scenario.qF(d));
  }
  for (int m = 0; m < m_slots; ++m) {
    SocConstraint cone;
    cone.radius = scenario.sxy;
    for (int d = 0; d < 2; ++d) cone.rows.push_back({{{qi(m + 1, d), 1.0}, {qi(m, d), -1.0}}, 0.0});
    cp.cones.push_back(std::move(cone));
  }

  VectorXd start(eta + 1);
  {
    std::vector<Point2> q0 = plan.q;
    std::vector<Point2> line(q0.size());
    for (int m = 0; m <= m_slots; ++m) line[static_cast<std::size_t>(m)] = scenario.q0 + (scenario.qF - scenario.q0) * (double(m) / m_slots);
    bool tight = false;
    for (int m = 0; m < m_slots; ++m) tight = tight || (q0[static_cast<std::size_t>(m) + 1] - q0[static_cast<std::size_t>(m)]).norm() >= scenario.sxy * (1.0 - 1e-9);
    if (tight) {
      for (int m = 1; m < m_slots; ++m) {
        auto& p = q0[static_cast<std::size_t>(m)];
        p = (1.0 - kBlend) * p + kBlend * line[static_cast<std::size_t>(m)];
      }
    }
    for (int m = 0; m <= m_slots; ++m) {
      start(qi(m, 0)) = q0[static_cast<std::size_t>(m)].x();
      start(qi(m, 1)) = q0[static_cast<std::size_t>(m)].y();
    }
  }

  std::vector<std::vector<RateTerm>> rate_terms(static_cast<std::size_t>(n_sn));
  std::vector<std::vector<Index>> supports(static_cast<std::size_t>(n_sn));
  for (int n = 0; n < n_sn; ++n) {
    const Point2& w = scenario.sensors[static_cast<std::size_t>(n)];
    auto& terms = rate_terms[static_cast<std::size_t>(n)];
    auto& support = supports[static_cast<std::size_t>(n)];
    support.push_back(eta);
    for (int m = 0; m < m_slots; ++m) {
      const Point2& qh = plan.q[static_cast<std::size_t>(m)];
      const double zm = plan.z[static_cast<std::size_t>(m)];
      const int si = s_idx(m, n);
      if (si < 0 && plan.a(m, n) <= kActive) continue;
      const SCACoefficients c = horizontal_coefficients(model, scenario.gamma(n), qh, w, zm, scenario.alpha);
      const double d_hat = (qh - w).squaredNorm();
      if (si >= 0) {
        start(si) = c.s_hat - kSBackoff;
        // s <= B1 + B2 v_lb(q)
        ConcaveConstraint sb;
        sb.support = {qi(m, 0), qi(m, 1), si};
        const double b1 = model.b1;
        const double b2 = model.b2;
        sb.eval = [c, w, d_hat, b1, b2](const VectorXd& x, VectorXd* grad, std::vector<Triplet>* hess) {
          const Point2 diff(x(0) - w.x(), x(1) - w.y());
          const double k = b2 * c.lambda_hat;
          if (grad != nullptr) {
            grad->resize(3);
            (*grad)(0) = -2.0 * k * diff.x();
            (*grad)(1) = -2.0 * k * diff.y();
            (*grad)(2) = -1.0;
          }
          if (hess != nullptr) {
            hess->emplace_back(0, 0, -2.0 * k);
            hess->emplace_back(1, 1, -2.0 * k);
          }
          return b1 + b2 * c.v_hat - k * (diff.squaredNorm() - d_hat) - x(2);
        };
        cp.constraints.push_back(std::move(sb));
        if (options.dense_s) cp.lower(si) = c.s_hat - 50.0;
      }
      if (plan.a(m, n) <= kActive) continue;
      RateTerm t{plan.a(m, n) / m_slots, c, d_hat, w, zm, static_cast<Index>(support.size()), si >= 0};
      terms.push_back(t);
      support.push_back(qi(m, 0));
      support.push_back(qi(m, 1));
      if (si >= 0) support.push_back(si);
    }
  }

  double eta0 = std::numeric_limits<double>::infinity();
  for (int n = 0; n < n_sn; ++n) {
    const auto& support = supports[static_cast<std::size_t>(n)];
    VectorXd local(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) local(static_cast<Index>(k)) = k == 0 ? 0.0 : start(support[k]);
    eta0 = std::min(eta0, eval_rate_horizontal(rate_terms[static_cast<std::size_t>(n)], local, nullptr, nullptr));
    ConcaveConstraint rc;
    rc.support = support;
    rc.eval = [terms = rate_terms[static_cast<std::size_t>(n)]](const VectorXd& x, VectorXd* grad,
                                                                 std::vector<Triplet>* hess) {
      return eval_rate_horizontal(terms, x, grad, hess);
    };
    cp.constraints.push_back(std::move(rc));
  }
  start(eta) = eta0 - kEtaBackoff;

  BlockStep step;
  step.plan = plan;
  step.s = MatrixXd::Constant(m_slots, n_sn, std::numeric_limits<double>::quiet_NaN());
  step.report = maximize_concave_program(cp, start, options.barrier);
  step.updated = step.report.status == SolverStatus::optimal;
  const VectorXd& x = step.updated ? step.report.x : start;
  if (step.updated) {
    for (int m = 1; m < m_slots; ++m) step.plan.q[static_cast<std::size_t>(m)] = Point2(x(qi(m, 0)), x(qi(m, 1)));
  }

  // tighten s to its exact bound at the returned path
  step.eta_lb = std::numeric_limits<double>::infinity();
  for (int n = 0; n < n_sn; ++n) {
    const Point2& w = scenario.sensors[static_cast<std::size_t>(n)];
    double acc = 0.0;
    for (int m = 0; m < m_slots; ++m) {
      const Point2& qn = step.plan.q[static_cast<std::size_t>(m)];
      const double zm = plan.z[static_cast<std::size_t>(m)];
      if (s_idx(m, n) >= 0) {
        step.s(m, n) = model.b1 + model.b2 * angle_indicator(qn, w, zm);
      }
      if (plan.a(m, n) <= kActive) continue;
      const SCACoefficients c = horizontal_coefficients(model, scenario.gamma(n), plan.q[static_cast<std::size_t>(m)], w, zm, scenario.alpha);
      const double s = s_idx(m, n) >= 0 ? step.s(m, n) : c.s_hat;
      acc += plan.a(m, n) / m_slots * rate_lower_bound(c, s, qn, plan.q[static_cast<std::size_t>(m)], w);
    }
    step.eta_lb = std::min(step.eta_lb, acc);
  }
  return step;
}

BlockStep solve_vertical(const Plan& plan, const Scenario& scenario, const LogisticModel& model,
                         const SchemeOptions& options) {
  check_block_inputs(plan, scenario, model);
  const int m_slots = scenario.slots;
  const int n_sn = scenario.num_sensors();
  const bool use_s = !model.flat();
  const double h = scenario.min_altitude;

  // expansion point: nudge floor-touching points into the interior
  std::vector<double> z_hat = plan.z;
  const double nudge = std::min(1e-3, scenario.sz / 4.0);
  for (int m = 1; m < m_slots; ++m) {
    if (z_hat[static_cast<std::size_t>(m)] <= h + 1e-7) z_hat[static_cast<std::size_t>(m)] = h + nudge;
  }

  Eigen::MatrixXi s_idx = Eigen::MatrixXi::Constant(m_slots, n_sn, -1);
  Index next = m_slots + 1;
  for (int m = 0; m < m_slots; ++m) {
    for (int n = 0; n < n_sn; ++n) {
      if (use_s && (options.dense_s || plan.a(m, n) > kActive)) s_idx(m, n) = static_cast<int>(next++);
    }
  }
  const Index eta = next;
  ConcaveProgram cp(eta + 1);
  cp.objective(eta) = 1.0;
  cp.upper(eta) = eta_ceiling(scenario);
  cp.pins.emplace_back(0, scenario.z0);
  cp.pins.emplace_back(m_slots, scenario.zF);
  for (int m = 0; m <= m_slots; ++m) cp.lower(m) = h;
  for (int m = 0; m < m_slots; ++m) {
    SocConstraint cone;
    cone.radius = scenario.sz;
    cone.rows.push_back({{{m + 1, 1.0}, {m, -1.0}}, 0.0});
    cp.cones.push_back(std::move(cone));
  }

  VectorXd start(eta + 1);
  for (int m = 0; m <= m_slots; ++m) start(m) = z_hat[static_cast<std::size_t>(m)];
  {
    bool tight = false;
    for (int m = 0; m < m_slots; ++m) tight = tight || std::abs(start(m + 1) - start(m)) >= scenario.sz * (1.0 - 1e-9);
    if (tight) {
      for (int m = 1; m < m_slots; ++m) {
        const double line = scenario.z0 + (scenario.zF - scenario.z0) * (double(m) / m_slots);
        start(m) = (1.0 - kBlend) * start(m) + kBlend * std::max(line, h + nudge);
      }
    }
  }

  std::vector<std::vector<RateTerm>> rate_terms(static_cast<std::size_t>(n_sn));
  std::vector<std::vector<Index>> supports(static_cast<std::size_t>(n_sn));
  for (int n = 0; n < n_sn; ++n) {
    const Point2& w = scenario.sensors[static_cast<std::size_t>(n)];
    auto& terms = rate_terms[static_cast<std::size_t>(n)];
    auto& support = supports[static_cast<std::size_t>(n)];
    support.push_back(eta);
    for (int m = 0; m < m_slots; ++m) {
      const Point2& qm = plan.q[static_cast<std::size_t>(m)];
      const double zh = z_hat[static_cast<std::size_t>(m)];
      const int si = s_idx(m, n);
      if (si < 0 && plan.a(m, n) <= kActive) continue;
      const SCACoefficients c = horizontal_coefficients(model, scenario.gamma(n), qm, w, zh, scenario.alpha);
      const double c2 = (qm - w).squaredNorm();
      if (si >= 0) {
        start(si) = c.s_hat - kSBackoff;
        ConcaveConstraint sb;
        sb.support = {static_cast<Index>(m), si};
        const double b1 = model.b1;
        const double b2 = model.b2;
        if (options.linearize_v) {
          const double slope = c2 / std::pow(c2 + zh * zh, 1.5);
          sb.eval = [b1, b2, c, zh, slope](const VectorXd& x, VectorXd* grad, std::vector<Triplet>*) {
            if (grad != nullptr) {
              grad->resize(2);
              (*grad)(0) = b2 * slope;
              (*grad)(1) = -1.0;
            }
            return b1 + b2 * (c.v_hat + slope * (x(0) - zh)) - x(1);
          };
        } else {
          sb.eval = [b1, b2, c2](const VectorXd& x, VectorXd* grad, std::vector<Triplet>* hess) {
            const double z = x(0);
            const double y = c2 + z * z;
            const double ry = std::sqrt(y);
            if (grad != nullptr) {
              grad->resize(2);
              (*grad)(0) = b2 * c2 / (y * ry);
              (*grad)(1) = -1.0;
            }
            if (hess != nullptr) hess->emplace_back(0, 0, -3.0 * b2 * c2 * z / (y * y * ry));
            return b1 + b2 * z / ry - x(1);
          };
        }
        cp.constraints.push_back(std::move(sb));
        if (options.dense_s) cp.lower(si) = c.s_hat - 50.0;
      }
      if (plan.a(m, n) <= kActive) continue;
      RateTerm t{plan.a(m, n) / m_slots, c, c2, w, zh, static_cast<Index>(support.size()), si >= 0};
      terms.push_back(t);
      support.push_back(m);
      if (si >= 0) support.push_back(si);
    }
  }

  double eta0 = std::numeric_limits<double>::infinity();
  for (int n = 0; n < n_sn; ++n) {
    const auto& support = supports[static_cast<std::size_t>(n)];
    VectorXd local(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) local(static_cast<Index>(k)) = k == 0 ? 0.0 : start(support[k]);
    eta0 = std::min(eta0, eval_rate_vertical(rate_terms[static_cast<std::size_t>(n)], local, nullptr, nullptr));
    ConcaveConstraint rc;
    rc.support = support;
    rc.eval = [terms = rate_terms[static_cast<std::size_t>(n)]](const VectorXd& x, VectorXd* grad,
                                                                 std::vector<Triplet>* hess) {
      return eval_rate_vertical(terms, x, grad, hess);
    };
    cp.constraints.push_back(std::move(rc));
  }
  start(eta) = eta0 - kEtaBackoff;

  BlockStep step;
  step.plan = plan;
  step.s = MatrixXd::Constant(m_slots, n_sn, std::numeric_limits<double>::quiet_NaN());
  step.report = maximize_concave_program(cp, start, options.barrier);
  step.updated = step.report.status == SolverStatus::optimal;
  if (step.updated) {
    for (int m = 1; m < m_slots; ++m) step.plan.z[static_cast<std::size_t>(m)] = step.report.x(m);
  }

  step.eta_lb = std::numeric_limits<double>::infinity();
  for (int n = 0; n < n_sn; ++n) {
    const Point2& w = scenario.sensors[static_cast<std::size_t>(n)];
    double acc = 0.0;
    for (int m = 0; m < m_slots; ++m) {
      const Point2& qm = plan.q[static_cast<std::size_t>(m)];
      const double zn = step.plan.z[static_cast<std::size_t>(m)];
      if (s_idx(m, n) >= 0) step.s(m, n) = model.b1 + model.b2 * angle_indicator(qm, w, zn);
      if (plan.a(m, n) <= kActive) continue;
      const double zh = z_hat[static_cast<std::size_t>(m)];
      const SCACoefficients c = horizontal_coefficients(model, scenario.gamma(n), qm, w, zh, scenario.alpha);
      const double s = s_idx(m, n) >= 0 ? step.s(m, n) : c.s_hat;
      acc += plan.a(m, n) / m_slots *
             (c.r_hat - c.phi_hat * (std::exp(-s) - std::exp(-c.s_hat)) - c.psi_hat * (zn * zn - zh * zh));
    }
    step.eta_lb = std::min(step.eta_lb, acc);
  }
  return step;
}

Plan run_bcd_from(Plan plan, const Scenario& scenario, const LogisticModel& fitted,
                  const SchemeOptions& options) {
  require(options.max_iterations >= 1, "run_bcd: max_iterations must be positive");
  const LogisticModel model = options.line_of_sight ? LogisticModel::line_of_sight() : fitted;
  plan.eta = plan_objective(plan, scenario, model);
  plan.trace = {plan.eta};
  plan.iterations = 0;
  plan.converged = false;

  auto try_accept = [&](Plan candidate, const std::string& label, int it) {
    candidate.eta = plan_objective(candidate, scenario, model);
    if (candidate.eta >= plan.eta) {
      plan.q = std::move(candidate.q);
      plan.z = std::move(candidate.z);
      plan.a = std::move(candidate.a);
      plan.eta = candidate.eta;
      return true;
    }
    plan.notes.push_back(label + " rejected at iteration " + std::to_string(it) + " (objective decreased)");
    return false;
  };

  for (int it = 1; it <= options.max_iterations; ++it) {
    const double prev = plan.eta;
    try {
      Plan cand = plan;
      cand.a = solve_scheduling(plan, scenario, model);
      try_accept(std::move(cand), "scheduling", it);
    } catch (const NumericalError& e) {
      plan.notes.push_back(std::string("scheduling failed at iteration ") + std::to_string(it) + ": " + e.what());
    }

    BlockStep hs = solve_horizontal(plan, scenario, model, options);
    if (hs.updated) {
      try_accept(std::move(hs.plan), "horizontal", it);
    } else {
      plan.notes.push_back("horizontal " + to_string(hs.report.status) + " at iteration " + std::to_string(it));
    }

    if (options.optimize_altitude) {
      BlockStep vs = solve_vertical(plan, scenario, model, options);
      if (vs.updated) {
        try_accept(std::move(vs.plan), "vertical", it);
      } else {
        plan.notes.push_back("vertical " + to_string(vs.report.status) + " at iteration " + std::to_string(it));
      }
    }

    plan.trace.push_back(plan.eta);
    plan.iterations = it;
    if (plan.eta - prev <= options.tolerance * std::max(std::abs(prev), 1e-12)) {
      plan.converged = true;
      break;
    }
  }
  return plan;
}

Plan run_bcd(const Scenario& scenario, const LogisticModel& model, const SchemeOptions& options) {
  Plan plan = initialize_plan(scenario);
  if (options.altitude) plan.z = fixed_altitude_profile(scenario, *options.altitude);
  return run_bcd_from(std::move(plan), scenario, model, options);
}

RoundingResult round_schedule(const MatrixXd& relaxed, const MatrixXd& rates) {
  require(relaxed.rows() == rates.rows() && relaxed.cols() == rates.cols(),
          "round_schedule: shape mismatch");
  const Index m_slots = relaxed.rows();
  const Index n_sn = relaxed.cols();
  const double inv_m = 1.0 / static_cast<double>(m_slots);
  RoundingResult out;
  out.relaxed_eta = max_min_rate(relaxed, rates);

  std::vector<Index> owner(static_cast<std::size_t>(m_slots), -1);
  for (Index m = 0; m < m_slots; ++m) {
    if (relaxed.row(m).sum() <= 1e-12) continue;
    Index best = 0;
    for (Index n = 1; n < n_sn; ++n) {
      if (relaxed(m, n) > relaxed(m, best)) best = n;
    }
    owner[static_cast<std::size_t>(m)] = best;
  }
  VectorXd avg = VectorXd::Zero(n_sn);
  for (Index m = 0; m < m_slots; ++m) {
    const Index o = owner[static_cast<std::size_t>(m)];
    if (o >= 0) avg(o) += rates(m, o) * inv_m;
  }

  while (true) {
    Index deficient = 0;
    const double current = avg.minCoeff(&deficient);
    double best_min = current;
    Index best_slot = -1;
    for (Index m = 0; m < m_slots; ++m) {
      const Index o = owner[static_cast<std::size_t>(m)];
      if (o == deficient) continue;
      double new_min = std::numeric_limits<double>::infinity();
      for (Index n = 0; n < n_sn; ++n) {
        double v = avg(n);
        if (n == deficient) v += rates(m, n) * inv_m;
        if (n == o) v -= rates(m, n) * inv_m;
        new_min = std::min(new_min, v);
      }
      if (new_min > best_min + 1e-15 * std::max(1.0, std::abs(best_min))) {
        best_min = new_min;
        best_slot = m;
      }
    }
    if (best_slot < 0) break;
    const Index o = owner[static_cast<std::size_t>(best_slot)];
    if (o >= 0) avg(o) -= rates(best_slot, o) * inv_m;
    avg(deficient) += rates(best_slot, deficient) * inv_m;
    owner[static_cast<std::size_t>(best_slot)] = deficient;
    ++out.moves;
  }

  out.a = MatrixXd::Zero(m_slots, n_sn);
  for (Index m = 0; m < m_slots; ++m) {
    const Index o = owner[static_cast<std::size_t>(m)];
    if (o >= 0) out.a(m, o) = 1.0;
  }
  out.rounded_eta = max_min_rate(out.a, rates);
  return out;
}

std::string check_plan(const Plan& plan, const Scenario& scenario) {
  const int m_slots = scenario.slots;
  std::ostringstream msg;
  if (plan.q.size() != static_cast<std::size_t>(m_slots) + 1 || plan.z.size() != plan.q.size()) {
    return "trajectory length is not M + 1";
  }
  if (plan.a.rows() != m_slots || plan.a.cols() != scenario.num_sensors()) return "schedule is not M x N";
  if (plan.q.front() != scenario.q0 || plan.q.back() != scenario.qF) return "horizontal endpoints moved";
  if (plan.z.front() != scenario.z0 || plan.z.back() != scenario.zF) return "altitude endpoints moved";
  for (int m = 0; m < m_slots; ++m) {
    const auto i = static_cast<std::size_t>(m);
    const double dxy = (plan.q[i + 1] - plan.q[i]).norm();
    if (dxy > scenario.sxy + 1e-6) {
      msg << "horizontal speed exceeded in slot " << m << " (" << dxy << " m)";
      return msg.str();
    }
    const double dz = std::abs(plan.z[i + 1] - plan.z[i]);
    if (dz > scenario.sz + 1e-6) {
      msg << "vertical speed exceeded in slot " << m << " (" << dz << " m)";
      return msg.str();
    }
    if (m > 0 && plan.z[i] < scenario.min_altitude - 1e-9) {
      msg << "altitude below H at point " << m;
      return msg.str();
    }
    if (plan.a.row(m).minCoeff() < -1e-12 || plan.a.row(m).sum() > 1.0 + 1e-9) {
      msg << "schedule infeasible in slot " << m;
      return msg.str();
    }
  }
  return {};
}

}  // namespace harvest
