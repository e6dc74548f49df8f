#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "srn/kinematics.hpp"

namespace srn {

/// Accompanied person: world position, world velocity and per-axis velocity noise.
struct HumanState
{
  Vec2 position{Vec2::Zero()};
  Vec2 velocity{Vec2::Zero()};
  double sigma{0.0};
};

enum class FovAxis {
  Heading,     ///< cone centred on the robot +x axis
  PaperSigns,  ///< literal sign pattern: cone centred on the robot -x axis
};

struct FovParams
{
  double beta{std::numbers::pi / 2.0};
  double kappa{1.0};
  FovAxis axis{FovAxis::Heading};

  void validate() const
  {
    if (!(beta > 0.0 && beta < std::numbers::pi)) { throw std::invalid_argument("FovParams: beta must lie in (0, pi)"); }
    if (!(kappa > 0.0)) { throw std::invalid_argument("FovParams: kappa must be positive"); }
  }

  /// +1 for the literal sign pattern, -1 when the cone sits on the heading.
  double axis_sign() const { return axis == FovAxis::PaperSigns ? 1.0 : -1.0; }
};

/// dh/dp = -[tan(beta/2), 1; tan(beta/2), -1].
inline Mat2 fov_jacobian(double beta)
{
  const double t = std::tan(beta / 2.0);
  Mat2 j;
  j << -t, -1.0, -t, 1.0;
  return j;
}

/// Two-sided cone barrier h(p) = -[tan(beta/2), 1; tan(beta/2), -1] p. Both components >= 0 inside the cone.
inline Vec2 fov_barrier(const Vec2 & p_rel, double beta)
{
  return fov_jacobian(beta) * p_rel;
}

/// Person position relative to the robot, in the robot frame.
inline Vec2 relative_position(const RobotState & robot, const HumanState & human)
{
  return world_to_robot(human.position - robot.position(), robot);
}

/// Barrier components for a robot/person pair under the configured axis convention.
inline Vec2 fov_values(const RobotState & robot, const HumanState & human, const FovParams & params)
{
  return fov_barrier(params.axis_sign() * relative_position(robot, human), params.beta);
}

/// Angle between the person and the cone axis, in [0, pi].
inline double human_bearing(const RobotState & robot, const HumanState & human, const FovParams & params)
{
  const Vec2 p = params.axis_sign() * relative_position(robot, human);
  // cone axis is -x in the literal convention
  return std::abs(std::atan2(p.y(), -p.x()));
}

/**
 * Time derivative of the robot-frame relative position:
 *   R^T pdot_H - (vx, vy) + omega (p_y, -p_x)
 * with p the robot-frame relative position.
 */
inline Vec2 relative_velocity(const RobotState & robot, const BodyTwist & tw, const HumanState & human)
{
  const Vec2 p = relative_position(robot, human);
  return world_to_robot(human.velocity, robot) - Vec2(tw.vx, tw.vy) + tw.omega * Vec2(p.y(), -p.x());
}

/// Linear inequality a^T u >= b over the wheel velocities.
struct LinearRow
{
  Vec3 a{Vec3::Zero()};
  double b{0.0};

  double slack(const Vec3 & u) const { return a.dot(u) - b; }
};

/**
 * FOV rows: dh/dp * pdot(u) >= -kappa h, componentwise, with pdot affine in
 * the wheel speeds through wheel_to_twist. The person's world velocity is a
 * constant and lands in b.
 */
inline std::array<LinearRow, 2> fov_constraint_rows(const RobotState & robot, const HumanState & human,
                                                     const OmniModel & model, const FovParams & params)
{
  const double s = params.axis_sign();
  const Vec2 p = relative_position(robot, human);
  const Mat2 jac = s * fov_jacobian(params.beta);
  const Vec2 h = jac * p;

  // pdot = R^T v_H + C u,  C = -W_xy + (p_y, -p_x) W_omega
  const Mat3 & w = model.wheel_to_twist_matrix();
  Eigen::Matrix<double, 2, 3> c = -w.topRows<2>();
  c += Vec2(p.y(), -p.x()) * w.row(2);

  const Eigen::Matrix<double, 2, 3> a = jac * c;
  const Vec2 drift = jac * world_to_robot(human.velocity, robot);

  std::array<LinearRow, 2> rows;
  for (int i = 0; i < 2; ++i) {
    rows[static_cast<std::size_t>(i)].a = a.row(i).transpose();
    rows[static_cast<std::size_t>(i)].b = -params.kappa * h(i) - drift(i);
  }
  return rows;
}

/// Point on the person's reference path.
struct ReferencePoint
{
  Vec2 position{Vec2::Zero()};
  Vec2 velocity{Vec2::Zero()};
};

/**
 * One Euler step of the person model: reference velocity, a proportional
 * pull back onto the reference position, and N(0, sigma^2) per-axis noise.
 */
template<typename Rng>
HumanState step_human(const HumanState & human, const ReferencePoint & reference, double dt, Rng & rng,
                      double tracking_gain = 1.0)
{
  if (!(dt > 0.0)) { throw std::invalid_argument("step_human: dt must be positive"); }
  HumanState next = human;
  Vec2 v = reference.velocity + tracking_gain * (reference.position - human.position);
  if (human.sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, human.sigma);
    const double nx = noise(rng);
    const double ny = noise(rng);
    v += Vec2(nx, ny);
  }
  next.velocity = v;
  next.position = human.position + dt * v;
  return next;
}

}  // namespace srn
