#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace srn {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double angle)
{
  double wrapped = std::remainder(angle, 2.0 * std::numbers::pi);
  if (wrapped <= -std::numbers::pi) { wrapped += 2.0 * std::numbers::pi; }
  return wrapped;
}

/// Planar rotation R(theta), body to world.
inline Mat2 rotation(double theta)
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

struct RobotState
{
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  Vec2 position() const { return {x, y}; }
  Vec3 vector() const { return {x, y, theta}; }
};

/// Body-frame velocity triple.
struct BodyTwist
{
  double vx{0.0};
  double vy{0.0};
  double omega{0.0};

  Vec3 vector() const { return {vx, vy, omega}; }
  static BodyTwist from(const Vec3 & v) { return {v(0), v(1), v(2)}; }
  double linear_speed() const { return std::hypot(vx, vy); }
};

/**
 * Three-wheeled omnidirectional base with wheels mounted at 0, 2pi/3 and
 * 4pi/3 in the body frame.
 *
 * Wheel i spins at u_i = (-sin(a_i) vx + cos(a_i) vy + L omega) / r.
 */
class OmniModel
{
public:
  OmniModel() : OmniModel(0.05, 0.2) {}

  OmniModel(double wheel_radius, double chassis_radius)
      : wheel_radius_(wheel_radius), chassis_radius_(chassis_radius)
  {
    if (!(wheel_radius > 0.0) || !(chassis_radius > 0.0)) {
      throw std::invalid_argument("OmniModel: wheel and chassis radius must be positive");
    }
    for (int i = 0; i < 3; ++i) {
      const double a = mounting_angle(i);
      twist_to_wheel_.row(i) << -std::sin(a), std::cos(a), chassis_radius_;
    }
    twist_to_wheel_ /= wheel_radius_;
    wheel_to_twist_ = twist_to_wheel_.inverse();
  }

  static double mounting_angle(int wheel) { return 2.0 * std::numbers::pi * wheel / 3.0; }

  double wheel_radius() const { return wheel_radius_; }
  double chassis_radius() const { return chassis_radius_; }

  /// Maps (vx, vy, omega) to wheel angular velocities.
  const Mat3 & twist_to_wheel_matrix() const { return twist_to_wheel_; }
  /// Maps wheel angular velocities to (vx, vy, omega).
  const Mat3 & wheel_to_twist_matrix() const { return wheel_to_twist_; }

private:
  double wheel_radius_;
  double chassis_radius_;
  Mat3 twist_to_wheel_;
  Mat3 wheel_to_twist_;
};

inline Vec3 twist_to_wheel(const OmniModel & model, const BodyTwist & tw)
{
  return model.twist_to_wheel_matrix() * tw.vector();
}

inline BodyTwist wheel_to_twist(const OmniModel & model, const Vec3 & u)
{
  return BodyTwist::from(model.wheel_to_twist_matrix() * u);
}

/// Input matrix g(x): wheel speeds to world-frame state velocity (xdot, ydot, thetadot).
inline Mat3 input_matrix(const OmniModel & model, const RobotState & state)
{
  Mat3 body_to_world = Mat3::Identity();
  body_to_world.topLeftCorner<2, 2>() = rotation(state.theta);
  return body_to_world * model.wheel_to_twist_matrix();
}

/// World-frame vector expressed in the robot frame.
inline Vec2 world_to_robot(const Vec2 & p_world, const RobotState & state)
{
  return rotation(state.theta).transpose() * p_world;
}

inline Vec2 robot_to_world(const Vec2 & p_robot, const RobotState & state)
{
  return rotation(state.theta) * p_robot;
}

/// One RK4 step of the planar kinematics under a frozen body twist; heading re-wrapped.
inline RobotState integrate(const RobotState & state, const BodyTwist & tw, double dt)
{
  if (!(dt > 0.0)) { throw std::invalid_argument("integrate: dt must be positive"); }

  auto deriv = [&tw](const Vec3 & s) -> Vec3 {
    const double c = std::cos(s(2));
    const double sn = std::sin(s(2));
    return {c * tw.vx - sn * tw.vy, sn * tw.vx + c * tw.vy, tw.omega};
  };

  const Vec3 s0 = state.vector();
  const Vec3 k1 = deriv(s0);
  const Vec3 k2 = deriv(s0 + 0.5 * dt * k1);
  const Vec3 k3 = deriv(s0 + 0.5 * dt * k2);
  const Vec3 k4 = deriv(s0 + dt * k3);
  const Vec3 s1 = s0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {s1(0), s1(1), wrap_angle(s1(2))};
}

}  // namespace srn
