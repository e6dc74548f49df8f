#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "srn/barrier.hpp"
#include "srn/kinematics.hpp"
#include "srn/qp.hpp"
#include "srn/social_fov.hpp"

namespace srn {

enum class FallbackMode {
  Stop,  ///< zero wheel command
};

struct ControllerConfig
{
  Vec3 q_diagonal{Vec3::Ones()};
  double v_max{1.0};
  int k_poly{16};
  double kappa_stl{1.0};
  double u_max{30.0};
  FallbackMode fallback{FallbackMode::Stop};
  QpSettings qp{};

  void validate() const
  {
    if (!(q_diagonal.minCoeff() > 0.0)) { throw std::invalid_argument("ControllerConfig: Q diagonal must be positive"); }
    if (!(v_max > 0.0)) { throw std::invalid_argument("ControllerConfig: v_max must be positive"); }
    if (k_poly < 8) { throw std::invalid_argument("ControllerConfig: k_poly must be at least 8"); }
    if (!(kappa_stl > 0.0)) { throw std::invalid_argument("ControllerConfig: kappa_stl must be positive"); }
    if (!(u_max > 0.0)) { throw std::invalid_argument("ControllerConfig: u_max must be positive"); }
  }
};

/**
 * Inscribed k-gon of the disk |(vx, vy)| <= v_max, as rows over the wheel
 * speeds: n_j . v <= v_max cos(pi/k) with n_j at angle 2 pi j / k. Vertices
 * lie on the circle, so every feasible point satisfies the true norm bound.
 */
inline std::vector<LinearRow> velocity_rows(const OmniModel & model, double v_max, int k_poly)
{
  if (!(v_max > 0.0) || k_poly < 8) { throw std::invalid_argument("velocity_rows: need v_max > 0 and k_poly >= 8"); }
  const Mat3 & w = model.wheel_to_twist_matrix();
  const double inradius = v_max * std::cos(std::numbers::pi / k_poly);
  std::vector<LinearRow> rows(static_cast<std::size_t>(k_poly));
  for (int j = 0; j < k_poly; ++j) {
    const double phi = 2.0 * std::numbers::pi * j / k_poly;
    auto & r = rows[static_cast<std::size_t>(j)];
    r.a = -(std::cos(phi) * w.row(0) + std::sin(phi) * w.row(1)).transpose();
    r.b = -inradius;
  }
  return rows;
}

/// db/dx g(x) u + db/dt >= -kappa b, with f = 0 and g(x) u the world-frame state velocity.
inline LinearRow stl_row(const BarrierEval & eval, const RobotState & x, const OmniModel & model, double kappa_stl)
{
  LinearRow r;
  r.a = (eval.gradient.transpose() * input_matrix(model, x)).transpose();
  r.b = -kappa_stl * eval.value - eval.time_derivative;
  return r;
}

inline LinearRow stl_row(const TimeVaryingBarrier & b, const RobotState & x, double t, const OmniModel & model,
                         double kappa_stl, std::span<const Vec2> dynamic_positions = {})
{
  return stl_row(b.evaluate(x, t, dynamic_positions), x, model, kappa_stl);
}

/// Everything the controller needs besides its configuration.
struct ControlInput
{
  RobotState robot{};
  double t{0.0};
  const TimeVaryingBarrier * barrier{nullptr};
  HumanState human{};
  std::span<const Vec2> dynamic_obstacles{};
  bool fov_active{false};
};

struct AssembledQp
{
  QpProblem problem;
  BarrierEval barrier{};
  bool has_barrier{false};
};

/// Rows in order: STL (if a barrier is given), k_poly velocity rows, two FOV rows (if active).
inline AssembledQp assemble_qp(const ControlInput & in, const OmniModel & model, const ControllerConfig & cfg,
                               const FovParams & fov)
{
  AssembledQp out;
  out.problem.cost = cfg.q_diagonal.asDiagonal();
  out.problem.box = cfg.u_max;
  if (in.barrier != nullptr) {
    out.barrier = in.barrier->evaluate(in.robot, in.t, in.dynamic_obstacles);
    out.has_barrier = true;
    out.problem.rows.push_back(stl_row(out.barrier, in.robot, model, cfg.kappa_stl));
  }
  for (auto & r : velocity_rows(model, cfg.v_max, cfg.k_poly)) { out.problem.rows.push_back(r); }
  if (in.fov_active) {
    for (auto & r : fov_constraint_rows(in.robot, in.human, model, fov)) { out.problem.rows.push_back(r); }
  }
  return out;
}

struct ControlOutput
{
  Vec3 wheels{Vec3::Zero()};
  BodyTwist twist{};
  bool feasible{false};
  BarrierEval barrier{};
  std::size_t row_count{0};
  double kkt_residual{0.0};
};

/**
 * Assemble, solve, convert. Infeasible programs fall back to a stop command
 * and are reported through `feasible`.
 */
inline ControlOutput control_step(const ControlInput & in, const OmniModel & model, const ControllerConfig & cfg,
                                  const FovParams & fov)
{
  const AssembledQp qp = assemble_qp(in, model, cfg, fov);
  const QpSolution sol = solve_qp(qp.problem, cfg.qp);

  ControlOutput out;
  out.barrier = qp.barrier;
  out.row_count = qp.problem.rows.size();
  out.feasible = sol.optimal();
  out.kkt_residual = sol.kkt_residual;
  if (out.feasible) {
    out.wheels = sol.u;
    out.twist = wheel_to_twist(model, sol.u);
    // the polygon vertices sit on the circle; round-off must not push past it
    const double speed = out.twist.linear_speed();
    if (speed > cfg.v_max) {
      out.wheels *= cfg.v_max / speed;
      out.twist = wheel_to_twist(model, out.wheels);
    }
  }
  return out;
}

}  // namespace srn
