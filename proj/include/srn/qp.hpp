#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "srn/kinematics.hpp"
#include "srn/social_fov.hpp"

namespace srn {

/**
 * min u^T Q u + c^T u  s.t.  a_i^T u >= b_i,  |u_k| <= box.
 *
 * Box rows are appended after the user rows when solving; their ids in the
 * active set are rows.size() + {0..5} (lower bound k -> 2k, upper -> 2k+1).
 */
struct QpProblem
{
  Mat3 cost{Mat3::Identity()};
  Vec3 linear{Vec3::Zero()};
  std::vector<LinearRow> rows;
  double box{std::numeric_limits<double>::infinity()};

  double objective(const Vec3 & u) const { return u.dot(cost * u) + linear.dot(u); }
};

enum class SolveStatus { Optimal, Infeasible };

struct QpSolution
{
  SolveStatus status{SolveStatus::Infeasible};
  Vec3 u{Vec3::Zero()};
  std::vector<std::size_t> active;
  Eigen::VectorXd multipliers;  ///< one per row, box rows included
  double kkt_residual{std::numeric_limits<double>::infinity()};
  int sweeps{0};
  bool polished{false};

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct QpSettings
{
  int max_sweeps{4000};
  int polish_every{8};
  double feasibility_tol{1e-9};
  double divergence_bound{1e10};
  int stall_sweeps{32};  ///< sweeps before handing over to the finite dual active-set method
};

namespace detail {

struct StackedRows
{
  Eigen::Matrix<double, Eigen::Dynamic, 3> a;
  Eigen::VectorXd b;
};

inline StackedRows stack_rows(const QpProblem & p)
{
  const bool boxed = std::isfinite(p.box);
  const auto m = static_cast<Eigen::Index>(p.rows.size() + (boxed ? 6 : 0));
  StackedRows s{Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(m, 3), Eigen::VectorXd::Zero(m)};
  Eigen::Index i = 0;
  for (const auto & r : p.rows) {
    s.a.row(i) = r.a.transpose();
    s.b(i) = r.b;
    ++i;
  }
  if (boxed) {
    for (int k = 0; k < 3; ++k) {
      s.a(i, k) = 1.0;
      s.b(i++) = -p.box;
      s.a(i, k) = -1.0;
      s.b(i++) = -p.box;
    }
  }
  return s;
}

}  // namespace detail

/// Max over stationarity, primal feasibility, dual feasibility and complementarity violations.
inline double kkt_residual(const QpProblem & p, const Vec3 & u, const Eigen::VectorXd & lambda)
{
  const auto s = detail::stack_rows(p);
  const Vec3 grad = 2.0 * p.cost * u + p.linear - s.a.transpose() * lambda;
  double r = grad.cwiseAbs().maxCoeff();
  const Eigen::VectorXd slack = s.a * u - s.b;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    r = std::max(r, -slack(i));
    r = std::max(r, -lambda(i));
    r = std::max(r, std::abs(lambda(i) * slack(i)));
  }
  return r;
}

namespace detail {

struct EqualitySolve
{
  Vec3 u;
  Eigen::VectorXd lambda;  ///< full length, zero off the working set
};

// Minimizer with the working-set rows held as equalities; dependent rows via a
// complete orthogonal decomposition of the reduced (dual) Hessian.
inline EqualitySolve solve_on_working_set(const StackedRows & s, const Mat3 & hinv, const Vec3 & u_free,
                                          const std::vector<Eigen::Index> & working)
{
  EqualitySolve out{u_free, Eigen::VectorXd::Zero(s.b.size())};
  if (working.empty()) { return out; }
  const auto k = static_cast<Eigen::Index>(working.size());
  Eigen::Matrix<double, Eigen::Dynamic, 3> aw(k, 3);
  Eigen::VectorXd bw(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    aw.row(i) = s.a.row(working[static_cast<std::size_t>(i)]);
    bw(i) = s.b(working[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXd reduced = aw * hinv * aw.transpose();
  const Eigen::VectorXd lw = reduced.completeOrthogonalDecomposition().solve(bw - aw * u_free);
  out.u = u_free + hinv * aw.transpose() * lw;
  for (Eigen::Index i = 0; i < k; ++i) { out.lambda(working[static_cast<std::size_t>(i)]) = lw(i); }
  return out;
}

/**
 * Dual active-set refinement seeded with a working set: drop the most
 * negative multiplier or add the most violated row until KKT holds.
 */
inline bool polish(const StackedRows & s, const Mat3 & hinv, const Vec3 & u_free, std::vector<Eigen::Index> working,
                   double tol, EqualitySolve & result)
{
  const Eigen::Index m = s.b.size();
  for (int iter = 0; iter < 4 * static_cast<int>(m) + 8; ++iter) {
    EqualitySolve eq = solve_on_working_set(s, hinv, u_free, working);

    Eigen::Index worst_dual = -1;
    double most_negative = -tol;
    for (const auto i : working) {
      if (eq.lambda(i) < most_negative) {
        most_negative = eq.lambda(i);
        worst_dual = i;
      }
    }
    if (worst_dual >= 0) {
      working.erase(std::find(working.begin(), working.end(), worst_dual));
      continue;
    }

    const Eigen::VectorXd slack = s.a * eq.u - s.b;
    Eigen::Index worst_primal = -1;
    double most_violated = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double scaled = slack(i) / std::max(1.0, s.a.row(i).norm());
      if (scaled < most_violated && std::find(working.begin(), working.end(), i) == working.end()) {
        most_violated = scaled;
        worst_primal = i;
      }
    }
    if (worst_primal >= 0) {
      working.push_back(worst_primal);
      continue;
    }
    for (Eigen::Index i = 0; i < eq.lambda.size(); ++i) { eq.lambda(i) = std::max(0.0, eq.lambda(i)); }
    result = std::move(eq);
    return true;
  }
  return false;
}

/**
 * Goldfarb-Idnani dual active-set method, started from the unconstrained
 * minimizer. Finite; returns false only when the rows are inconsistent.
 */
inline bool dual_active_set(const StackedRows & s, const Mat3 & hinv, const Vec3 & u_free,
                            const std::vector<char> & usable, double tol, EqualitySolve & result)
{
  const Eigen::Index m = s.b.size();
  Eigen::VectorXd scale(m);
  for (Eigen::Index i = 0; i < m; ++i) { scale(i) = std::max(1.0, s.a.row(i).norm()); }

  Vec3 u = u_free;
  std::vector<Eigen::Index> active;
  std::vector<double> mult;

  for (int outer = 0; outer < 8 * static_cast<int>(m) + 16; ++outer) {
    Eigen::Index p = -1;
    double most_violated = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!usable[static_cast<std::size_t>(i)] || std::find(active.begin(), active.end(), i) != active.end()) { continue; }
      const double scaled = (s.a.row(i).dot(u) - s.b(i)) / scale(i);
      if (scaled < most_violated) {
        most_violated = scaled;
        p = i;
      }
    }
    if (p < 0) {
      result.u = u;
      result.lambda = Eigen::VectorXd::Zero(m);
      for (std::size_t j = 0; j < active.size(); ++j) { result.lambda(active[j]) = mult[j]; }
      return true;
    }

    const Vec3 np = s.a.row(p).transpose();
    double mult_p = 0.0;
    for (int inner = 0; inner < 8 * static_cast<int>(m) + 16; ++inner) {
      const auto k = static_cast<Eigen::Index>(active.size());
      Vec3 z = hinv * np;
      Eigen::VectorXd r = Eigen::VectorXd::Zero(k);
      if (k > 0) {
        Eigen::Matrix<double, 3, Eigen::Dynamic> n(3, k);
        for (Eigen::Index j = 0; j < k; ++j) { n.col(j) = s.a.row(active[static_cast<std::size_t>(j)]).transpose(); }
        const Eigen::MatrixXd reduced = n.transpose() * hinv * n;
        r = reduced.ldlt().solve(n.transpose() * hinv * np);
        z = hinv * (np - n * r);
      }

      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (r(j) > 0.0 && mult[static_cast<std::size_t>(j)] / r(j) < t1) {
          t1 = mult[static_cast<std::size_t>(j)] / r(j);
          drop = j;
        }
      }
      const double curvature = z.dot(np);
      const bool step_in_primal = z.norm() > 1e-12 * std::max(1.0, (hinv * np).norm());
      const double t2 = step_in_primal ? -(np.dot(u) - s.b(p)) / curvature : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) { return false; }

      if (step_in_primal) { u += t * z; }
      for (Eigen::Index j = 0; j < k; ++j) { mult[static_cast<std::size_t>(j)] -= t * r(j); }
      mult_p += t;
      if (t2 <= t1) {
        active.push_back(p);
        mult.push_back(mult_p);
        break;
      }
      active.erase(active.begin() + drop);
      mult.erase(mult.begin() + drop);
    }
  }
  return false;
}

}  // namespace detail

/**
 * Solves the QP by Hildreth's dual coordinate ascent; the support of the dual
 * iterate periodically seeds an active-set polish that returns the exact
 * minimizer once KKT conditions hold. A dual that has not settled after
 * `stall_sweeps` is finished by the Goldfarb-Idnani method. Deterministic.
 */
inline QpSolution solve_qp(const QpProblem & p, const QpSettings & settings = {})
{
  QpSolution sol;
  const detail::StackedRows s = detail::stack_rows(p);
  const Eigen::Index m = s.b.size();
  sol.multipliers = Eigen::VectorXd::Zero(m);

  const Mat3 hess = 2.0 * p.cost;
  const Eigen::LLT<Mat3> llt(hess);
  if (llt.info() != Eigen::Success) { return sol; }
  const Mat3 hinv = llt.solve(Mat3::Identity());
  const Vec3 u_free = -hinv * p.linear;
  if (m == 0) {
    sol.u = u_free;
    sol.kkt_residual = kkt_residual(p, u_free, sol.multipliers);
    sol.status = SolveStatus::Optimal;
    return sol;
  }

  // rows with a ~ 0 are either vacuous or make the problem infeasible
  std::vector<char> usable(static_cast<std::size_t>(m), 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (s.a.row(i).norm() < 1e-14) {
      if (s.b(i) > settings.feasibility_tol) { return sol; }
      usable[static_cast<std::size_t>(i)] = 0;
    }
  }

  const Eigen::MatrixXd pmat = s.a * hinv * s.a.transpose();
  const Eigen::VectorXd d = s.b - s.a * u_free;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd plambda = Eigen::VectorXd::Zero(m);

  auto finish = [&](const Vec3 & u, const Eigen::VectorXd & lam, bool polished) {
    sol.u = u;
    sol.multipliers = lam;
    sol.polished = polished;
    sol.kkt_residual = kkt_residual(p, u, lam);
    sol.active.clear();
    const Eigen::VectorXd slack = s.a * u - s.b;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (lam(i) > 0.0 || std::abs(slack(i)) <= settings.feasibility_tol) { sol.active.push_back(static_cast<std::size_t>(i)); }
    }
    sol.status = SolveStatus::Optimal;
  };

  auto try_polish = [&]() {
    std::vector<Eigen::Index> working;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (usable[static_cast<std::size_t>(i)] && lambda(i) > 0.0) { working.push_back(i); }
    }
    detail::EqualitySolve eq;
    if (!detail::polish(s, hinv, u_free, working, settings.feasibility_tol, eq)) { return false; }
    if (kkt_residual(p, eq.u, eq.lambda) > 1e-9 * std::max(1.0, eq.lambda.cwiseAbs().maxCoeff())) { return false; }
    finish(eq.u, eq.lambda, true);
    return true;
  };

  for (int sweep = 1; sweep <= settings.max_sweeps; ++sweep) {
    sol.sweeps = sweep;
    double change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!usable[static_cast<std::size_t>(i)]) { continue; }
      const double next = std::max(0.0, lambda(i) + (d(i) - plambda(i)) / pmat(i, i));
      const double delta = next - lambda(i);
      if (delta != 0.0) {
        plambda += delta * pmat.col(i);
        lambda(i) = next;
        change = std::max(change, std::abs(delta));
      }
    }
    if (lambda.maxCoeff() > settings.divergence_bound) { return sol; }

    // a stalled dual is either slow or infeasible; settle it with the finite method
    if (sweep == settings.stall_sweeps) {
      detail::EqualitySolve eq;
      if (!detail::dual_active_set(s, hinv, u_free, usable, settings.feasibility_tol, eq)) { return sol; }
      finish(eq.u, eq.lambda, true);
      return sol;
    }

    const bool converged = change <= 1e-14 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if (converged || sweep % settings.polish_every == 0 || sweep == 1) {
      if (try_polish()) { return sol; }
      if (converged) {
        const Vec3 u = u_free + hinv * s.a.transpose() * lambda;
        const Eigen::VectorXd slack = s.a * u - s.b;
        if (m == 0 || slack.minCoeff() >= -settings.feasibility_tol) {
          finish(u, lambda, false);
          return sol;
        }
      }
    }
  }

  const Vec3 u = u_free + hinv * s.a.transpose() * lambda;
  const Eigen::VectorXd slack = s.a * u - s.b;
  if (m == 0 || slack.minCoeff() >= -1e-8) {
    finish(u, lambda, false);
  }
  return sol;
}

}  // namespace srn
