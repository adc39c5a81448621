// SPDX-License-Identifier: Apache-2.0
#include "harvest/concave_program.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "harvest/error.hpp"

namespace harvest {

ConcaveProgram::ConcaveProgram(Eigen::Index n)
    : objective(Eigen::VectorXd::Zero(n)),
      lower(Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity())),
      upper(Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity())) {}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct ConeCache {
  std::vector<Index> free_idx;  // free-space indices touched by the cone
  MatrixXd a;                   // rows x free_idx coefficients
};

struct BoxTerm {
  Index f;       // free-space index
  double sign;   // +1: x - bound, -1: bound - x
  double bound;
};

/// Value and gradient of every logarithmic term at a point, plus the merit
/// gradient, the dual residual and (optionally) the primal-dual matrix.
struct Linearization {
  std::vector<double> g;
  std::vector<std::vector<Index>> idx;  // free indices of each non-box term
  std::vector<VectorXd> grad;
  VectorXd merit_grad;  // -c - w sum grad g / g
  VectorXd dual;        // -c - sum lambda grad g
  std::vector<Triplet> d;
  MatrixXd u;
};

class Barrier {
 public:
  Barrier(const ConcaveProgram& cp, const BarrierOptions& opt) : cp_(cp), opt_(opt) {
    const Index n = cp.size();
    pinned_.assign(static_cast<std::size_t>(n), false);
    for (const auto& [i, v] : cp.pins) {
      detail::require(i >= 0 && i < n, "concave program: pin index out of range");
      pinned_[static_cast<std::size_t>(i)] = true;
    }
    to_free_.assign(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
      if (!pinned_[static_cast<std::size_t>(i)]) {
        to_free_[static_cast<std::size_t>(i)] = static_cast<Index>(free_.size());
        free_.push_back(i);
      }
    }
    for (const auto& c : cp.constraints) {
      for (Index i : c.support) detail::require(i >= 0 && i < n, "concave program: support index out of range");
    }
    for (const auto& cone : cp.cones) {
      ConeCache cache;
      for (const auto& row : cone.rows) {
        for (const auto& [i, coef] : row.terms) {
          detail::require(i >= 0 && i < n, "concave program: cone index out of range");
          const Index f = to_free_[static_cast<std::size_t>(i)];
          if (f >= 0 && std::find(cache.free_idx.begin(), cache.free_idx.end(), f) == cache.free_idx.end()) {
            cache.free_idx.push_back(f);
          }
        }
      }
      cache.a = MatrixXd::Zero(static_cast<Index>(cone.rows.size()), static_cast<Index>(cache.free_idx.size()));
      for (std::size_t r = 0; r < cone.rows.size(); ++r) {
        for (const auto& [i, coef] : cone.rows[r].terms) {
          const Index f = to_free_[static_cast<std::size_t>(i)];
          if (f < 0) continue;
          const auto pos = std::find(cache.free_idx.begin(), cache.free_idx.end(), f) - cache.free_idx.begin();
          cache.a(static_cast<Index>(r), pos) += coef;
        }
      }
      cones_.push_back(std::move(cache));
    }
    for (std::size_t f = 0; f < free_.size(); ++f) {
      const Index i = free_[f];
      if (std::isfinite(cp.lower(i))) boxes_.push_back({static_cast<Index>(f), 1.0, cp.lower(i)});
      if (std::isfinite(cp.upper(i))) boxes_.push_back({static_cast<Index>(f), -1.0, cp.upper(i)});
    }
  }

  [[nodiscard]] Index free_size() const { return static_cast<Index>(free_.size()); }
  [[nodiscard]] const std::vector<Index>& free_vars() const { return free_; }
  [[nodiscard]] std::size_t smooth_terms() const { return cp_.constraints.size() + cp_.cones.size(); }
  [[nodiscard]] const std::vector<BoxTerm>& boxes() const { return boxes_; }

  /// Number of logarithmic terms; the duality gap of a centered point is
  /// weight * count.
  [[nodiscard]] std::size_t count() const { return smooth_terms() + boxes_.size(); }

  static VectorXd gather(const VectorXd& x, const std::vector<Index>& support) {
    VectorXd local(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) local(static_cast<Index>(k)) = x(support[k]);
    return local;
  }

  static double cone_value(const SocConstraint& cone, const VectorXd& x, VectorXd* rho = nullptr) {
    double g = cone.radius * cone.radius;
    if (rho != nullptr) rho->resize(static_cast<Index>(cone.rows.size()));
    for (std::size_t r = 0; r < cone.rows.size(); ++r) {
      const double v = cone.rows[r].value(x);
      if (rho != nullptr) (*rho)(static_cast<Index>(r)) = v;
      g -= v * v;
    }
    return g;
  }

  [[nodiscard]] double box_value(const BoxTerm& b, const VectorXd& x) const {
    return b.sign * (x(free_[static_cast<std::size_t>(b.f)]) - b.bound);
  }

  /// Smallest constraint slack (box slacks on free variables included).
  [[nodiscard]] double min_slack(const VectorXd& x) const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& c : cp_.constraints) s = std::min(s, c.eval(gather(x, c.support), nullptr, nullptr));
    for (const auto& cone : cp_.cones) s = std::min(s, cone_value(cone, x));
    for (const auto& b : boxes_) s = std::min(s, box_value(b, x));
    return s;
  }

  /// -sum log(slack); +inf outside the strict interior.
  [[nodiscard]] double phi(const VectorXd& x) const {
    double acc = 0.0;
    const auto add = [&acc](double g) {
      if (!(g > 0.0) || !std::isfinite(g)) return false;
      acc -= std::log(g);
      return true;
    };
    for (const auto& c : cp_.constraints) {
      if (!add(c.eval(gather(x, c.support), nullptr, nullptr))) return std::numeric_limits<double>::infinity();
    }
    for (const auto& cone : cp_.cones) {
      if (!add(cone_value(cone, x))) return std::numeric_limits<double>::infinity();
    }
    for (const auto& b : boxes_) {
      if (!add(box_value(b, x))) return std::numeric_limits<double>::infinity();
    }
    return acc;
  }

  /// Term values only, in the order constraints, cones, boxes.
  void values(const VectorXd& x, std::vector<double>& g) const {
    g.clear();
    for (const auto& c : cp_.constraints) g.push_back(c.eval(gather(x, c.support), nullptr, nullptr));
    for (const auto& cone : cp_.cones) g.push_back(cone_value(cone, x));
    for (const auto& b : boxes_) g.push_back(box_value(b, x));
  }

  /// Fills `lin` at x for barrier weight w and multipliers lam. With
  /// `hessian`, also the matrix sum lam (-hess g) + sum (lam / g) grad g grad g'
  /// as a sparse part plus low-rank columns.
  void linearize(const VectorXd& x, double w, const VectorXd& lam, bool hessian, Linearization& lin) const {
    const Index nf = free_size();
    const std::size_t ns = smooth_terms();
    lin.g.assign(count(), 0.0);
    lin.idx.resize(ns);
    lin.grad.resize(ns);
    lin.merit_grad.setZero(nf);
    for (Index f = 0; f < nf; ++f) lin.merit_grad(f) = -cp_.objective(free_[static_cast<std::size_t>(f)]);
    lin.dual = lin.merit_grad;
    lin.d.clear();
    std::vector<VectorXd> low_rank;

    const auto add_outer = [&](const std::vector<Index>& idx, const VectorXd& gr, double coef) {
      if (idx.size() > opt_.low_rank_support) {
        VectorXd col = VectorXd::Zero(nf);
        const double s = std::sqrt(coef);
        for (std::size_t a = 0; a < idx.size(); ++a) col(idx[a]) += s * gr(static_cast<Index>(a));
        low_rank.push_back(std::move(col));
        return;
      }
      for (std::size_t a = 0; a < idx.size(); ++a) {
        if (gr(static_cast<Index>(a)) == 0.0) continue;
        for (std::size_t b = 0; b < idx.size(); ++b) {
          if (gr(static_cast<Index>(b)) == 0.0) continue;
          lin.d.emplace_back(idx[a], idx[b], coef * gr(static_cast<Index>(a)) * gr(static_cast<Index>(b)));
        }
      }
    };

    VectorXd lg;
    std::vector<Triplet> lh;
    for (std::size_t k = 0; k < cp_.constraints.size(); ++k) {
      const auto& c = cp_.constraints[k];
      lh.clear();
      const double g = c.eval(gather(x, c.support), &lg, hessian ? &lh : nullptr);
      const double l = lam(static_cast<Index>(k));
      lin.g[k] = g;
      // fold the support onto free indices, dropping pinned coordinates
      auto& idx = lin.idx[k];
      auto& gr = lin.grad[k];
      idx.clear();
      std::vector<Index> pos(c.support.size(), -1);
      for (std::size_t s = 0; s < c.support.size(); ++s) {
        const Index f = to_free_[static_cast<std::size_t>(c.support[s])];
        if (f < 0) continue;
        const auto it = std::find(idx.begin(), idx.end(), f);
        pos[s] = it - idx.begin();
        if (it == idx.end()) idx.push_back(f);
      }
      gr.setZero(static_cast<Index>(idx.size()));
      for (std::size_t s = 0; s < c.support.size(); ++s) {
        if (pos[s] >= 0) gr(pos[s]) += lg(static_cast<Index>(s));
      }
      for (std::size_t a = 0; a < idx.size(); ++a) {
        lin.merit_grad(idx[a]) -= w * gr(static_cast<Index>(a)) / g;
        lin.dual(idx[a]) -= l * gr(static_cast<Index>(a));
      }
      if (!hessian) continue;
      for (const auto& t : lh) {
        const Index pi = pos[static_cast<std::size_t>(t.row())];
        const Index pj = pos[static_cast<std::size_t>(t.col())];
        if (pi >= 0 && pj >= 0) lin.d.emplace_back(idx[pi], idx[pj], -l * t.value());
      }
      add_outer(idx, gr, l / g);
    }

    VectorXd rho;
    for (std::size_t k = 0; k < cp_.cones.size(); ++k) {
      const std::size_t t = cp_.constraints.size() + k;
      const auto& cache = cones_[k];
      const double g = cone_value(cp_.cones[k], x, &rho);
      const double l = lam(static_cast<Index>(t));
      lin.g[t] = g;
      lin.idx[t] = cache.free_idx;
      lin.grad[t] = -2.0 * cache.a.transpose() * rho;
      const VectorXd& gr = lin.grad[t];
      for (Index j = 0; j < gr.size(); ++j) {
        lin.merit_grad(cache.free_idx[static_cast<std::size_t>(j)]) -= w * gr(j) / g;
        lin.dual(cache.free_idx[static_cast<std::size_t>(j)]) -= l * gr(j);
      }
      if (!hessian) continue;
      const MatrixXd h = (l / g) * gr * gr.transpose() + 2.0 * l * cache.a.transpose() * cache.a;
      for (Index i = 0; i < h.rows(); ++i) {
        for (Index j = 0; j < h.cols(); ++j) {
          lin.d.emplace_back(cache.free_idx[static_cast<std::size_t>(i)], cache.free_idx[static_cast<std::size_t>(j)], h(i, j));
        }
      }
    }

    std::vector<double> diag(static_cast<std::size_t>(nf), 0.0);
    for (std::size_t k = 0; k < boxes_.size(); ++k) {
      const std::size_t t = ns + k;
      const auto& b = boxes_[k];
      const double g = box_value(b, x);
      const double l = lam(static_cast<Index>(t));
      lin.g[t] = g;
      lin.merit_grad(b.f) -= w * b.sign / g;
      lin.dual(b.f) -= l * b.sign;
      diag[static_cast<std::size_t>(b.f)] += l / g;
    }
    if (hessian) {
      for (Index f = 0; f < nf; ++f) lin.d.emplace_back(f, f, diag[static_cast<std::size_t>(f)]);
      lin.u.resize(nf, static_cast<Index>(low_rank.size()));
      for (std::size_t k = 0; k < low_rank.size(); ++k) lin.u.col(static_cast<Index>(k)) = low_rank[k];
    }
  }

  /// grad g_t' dx for every term.
  [[nodiscard]] std::vector<double> directional(const Linearization& lin, const VectorXd& dx) const {
    std::vector<double> out(count(), 0.0);
    for (std::size_t t = 0; t < smooth_terms(); ++t) {
      double s = 0.0;
      for (std::size_t a = 0; a < lin.idx[t].size(); ++a) s += lin.grad[t](static_cast<Index>(a)) * dx(lin.idx[t][a]);
      out[t] = s;
    }
    for (std::size_t k = 0; k < boxes_.size(); ++k) out[smooth_terms() + k] = boxes_[k].sign * dx(boxes_[k].f);
    return out;
  }

 private:
  const ConcaveProgram& cp_;
  const BarrierOptions& opt_;
  std::vector<bool> pinned_;
  std::vector<Index> to_free_;
  std::vector<Index> free_;
  std::vector<ConeCache> cones_;
  std::vector<BoxTerm> boxes_;
};

// Solves (D + U U') dx = rhs. Without low-rank columns D is factored
// directly; otherwise the bordered quasi-definite system
//   [D  U; U' -I] [dx; y] = [rhs; 0]
// is factored, which stays accurate when D alone is nearly singular.
bool newton_direction(Index nf, const std::vector<Triplet>& d_trip, const MatrixXd& u,
                      const VectorXd& rhs, VectorXd& dx) {
  const Index nr = u.cols();
  const Index dim = nf + nr;
  std::vector<Triplet> trip = d_trip;
  for (Index k = 0; k < nr; ++k) {
    for (Index f = 0; f < nf; ++f) {
      if (u(f, k) == 0.0) continue;
      trip.emplace_back(f, nf + k, u(f, k));
      trip.emplace_back(nf + k, f, u(f, k));
    }
    trip.emplace_back(nf + k, nf + k, -1.0);
  }
  SpMat k_mat(dim, dim);
  k_mat.setFromTriplets(trip.begin(), trip.end());
  double diag_max = 0.0;
  for (Index i = 0; i < nf; ++i) diag_max = std::max(diag_max, std::abs(k_mat.coeff(i, i)));

  VectorXd full_rhs = VectorXd::Zero(dim);
  full_rhs.head(nf) = rhs;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  ldlt.compute(k_mat);
  double reg = 1e-14 * (1.0 + diag_max);
  for (int attempt = 0; ldlt.info() != Eigen::Success; ++attempt) {
    if (attempt >= 12) return false;
    SpMat shifted = k_mat;
    for (Index i = 0; i < nf; ++i) shifted.coeffRef(i, i) += reg;
    ldlt.compute(shifted);
    reg *= 100.0;
  }
  VectorXd sol = ldlt.solve(full_rhs);
  for (int pass = 0; pass < 2 && sol.allFinite(); ++pass) {
    const VectorXd r = full_rhs - k_mat * sol;
    if (r.norm() <= 1e-14 * full_rhs.norm()) break;
    sol += ldlt.solve(r);
  }
  if (!sol.allFinite()) return false;
  dx = sol.head(nf);
  return true;
}

double feasibility(const ConcaveProgram& cp, const Barrier& barrier, const VectorXd& x) {
  double viol = std::max(0.0, -barrier.min_slack(x));
  for (const auto& [i, v] : cp.pins) viol = std::max(viol, std::abs(x(i) - v));
  return viol;
}

}  // namespace

SolverReport maximize_concave_program(const ConcaveProgram& cp, const Eigen::VectorXd& start,
                                      const BarrierOptions& options) {
  const Index n = cp.size();
  detail::require(start.size() == n && cp.lower.size() == n && cp.upper.size() == n,
                  "maximize_concave_program: inconsistent dimensions");
  detail::require(options.mu_start > 0.0 && options.mu_final > 0.0 && options.mu_factor > 1.0,
                  "maximize_concave_program: bad barrier schedule");
  Barrier barrier(cp, options);

  SolverReport report;
  VectorXd x = start;
  for (const auto& [i, v] : cp.pins) x(i) = v;
  const double start_obj = cp.objective.dot(x);

  if (!(barrier.min_slack(x) > 0.0) || !std::isfinite(barrier.phi(x))) {
    report.status = SolverStatus::infeasible_start;
    report.x = start;
    report.objective = cp.objective.dot(start);
    report.feasibility_residual = feasibility(cp, barrier, start);
    return report;
  }

  const Index nf = barrier.free_size();
  const auto& free = barrier.free_vars();
  const auto terms = static_cast<Index>(barrier.count());
  constexpr double kappa = 1e10;  // multiplier drift allowed around w / g
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  Linearization lin;
  VectorXd dx;
  std::vector<double> g_new;
  bool broken = false;

  // mu is the target duality gap; each log term carries weight mu / count
  double mu = options.mu_start;
  double w = mu / static_cast<double>(std::max<Index>(terms, 1));
  VectorXd lam(terms);
  {
    std::vector<double> g0;
    barrier.values(x, g0);
    for (Index t = 0; t < terms; ++t) lam(t) = w / g0[static_cast<std::size_t>(t)];
  }

  struct {
    VectorXd x;
    double dual = 0.0;
    std::size_t trace_size = 0;
  } checkpoint;

  while (nf > 0) {
    const bool last = mu <= options.mu_final * (1.0 + 1e-12);
    w = mu / static_cast<double>(std::max<Index>(terms, 1));
    double f_x = -cp.objective.dot(x) + w * barrier.phi(x);
    for (int it = 0; it < options.max_newton_per_stage; ++it) {
      barrier.linearize(x, w, lam, true, lin);
      if (!newton_direction(nf, lin.d, lin.u, -lin.merit_grad, dx)) {
        broken = true;
        break;
      }
      // centered once the Newton decrement, measured in units of w, is small
      const double dec = -lin.merit_grad.dot(dx);
      const double scale = 1.0 + std::abs(cp.objective.dot(x));
      if (dec <= 1e-2 * w && (!last || lin.dual.lpNorm<Eigen::Infinity>() <= 1e-8)) break;
      if (!(dec > 1e-15 * scale)) break;  // centered to rounding, or the solve lost accuracy

      // multiplier step: linearized lam g = w
      const std::vector<double> gdx = barrier.directional(lin, dx);
      VectorXd dlam(terms);
      double alpha_lam = 1.0;
      for (Index t = 0; t < terms; ++t) {
        const double g = lin.g[static_cast<std::size_t>(t)];
        dlam(t) = w / g - lam(t) - lam(t) * gdx[static_cast<std::size_t>(t)] / g;
        if (dlam(t) < 0.0) alpha_lam = std::min(alpha_lam, 0.99 * lam(t) / -dlam(t));
      }

      // fraction-to-boundary on the box, then backtracking on the merit
      double alpha = 1.0;
      for (const auto& b : barrier.boxes()) {
        const double step = b.sign * dx(b.f);
        if (step < 0.0) alpha = std::min(alpha, 0.99 * barrier.box_value(b, x) / -step);
      }
      const auto gentle = [&](const VectorXd& trial) {
        barrier.values(trial, g_new);
        for (Index t = 0; t < terms; ++t) {
          if (!(g_new[static_cast<std::size_t>(t)] >= 0.1 * lin.g[static_cast<std::size_t>(t)])) return false;
        }
        return true;
      };
      VectorXd trial = x;
      bool accepted = false;
      while (alpha >= 1e-14) {
        for (Index f = 0; f < nf; ++f) trial(free[static_cast<std::size_t>(f)]) = x(free[static_cast<std::size_t>(f)]) + alpha * dx(f);
        const double p = barrier.phi(trial);
        if (std::isfinite(p)) {
          const double f_trial = -cp.objective.dot(trial) + w * p;
          // below the merit's rounding floor Armijo is meaningless; accept a
          // step that keeps every slack within a factor of ten instead
          const bool floor = 1e-4 * alpha * dec < 64.0 * kEps * (std::abs(f_x) + 1.0);
          if (f_trial <= f_x - 1e-4 * alpha * dec || (floor && gentle(trial))) {
            x = trial;
            f_x = f_trial;
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      ++report.iterations;
      if (!accepted) {
        // rounding floor: a nearly centered point is good enough
        if (dec > 1e-8 * scale) broken = true;
        break;
      }
      lam += alpha_lam * dlam;
      barrier.values(x, g_new);
      for (Index t = 0; t < terms; ++t) {
        const double c = w / g_new[static_cast<std::size_t>(t)];
        lam(t) = std::clamp(lam(t), c / kappa, c * kappa);
      }
    }
    report.trace.push_back(cp.objective.dot(x));
    if (broken) break;
    barrier.linearize(x, w, lam, false, lin);
    const double dual = lin.dual.lpNorm<Eigen::Infinity>();
    if (dual <= 1e-6) checkpoint = {x, dual, report.trace.size()};
    if (last) break;
    mu = std::max(mu / options.mu_factor, options.mu_final);
  }

  if (nf > 0) {
    barrier.linearize(x, w, lam, false, lin);
    report.stationarity_residual = lin.dual.lpNorm<Eigen::Infinity>();
    // the last stages run close to the limits of double precision; if they
    // lose centrality, fall back to the last well-centered stage
    if (report.stationarity_residual > 1e-6 && checkpoint.trace_size > 0) {
      x = checkpoint.x;
      report.stationarity_residual = checkpoint.dual;
      report.trace.resize(checkpoint.trace_size);
      broken = false;
    }
  }
  report.feasibility_residual = feasibility(cp, barrier, x);
  report.x = x;
  report.objective = cp.objective.dot(x);
  const bool converged = report.feasibility_residual <= 1e-8 && report.stationarity_residual <= 1e-6;
  report.status = !broken && converged ? SolverStatus::optimal : SolverStatus::stalled;

  if (report.objective < start_obj - 1e-9) {
    report.status = SolverStatus::stalled;
    report.x = start;
    for (const auto& [i, v] : cp.pins) report.x(i) = v;
    report.objective = start_obj;
    report.feasibility_residual = feasibility(cp, barrier, report.x);
  }
  return report;
}

}  // namespace harvest
