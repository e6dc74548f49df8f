#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srn/barrier.hpp"
#include "srn/controller.hpp"
#include "srn/kinematics.hpp"
#include "srn/social_fov.hpp"
#include "srn/stl.hpp"

namespace srn {

class ScenarioError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct StaticObstacle
{
  std::string name;
  Vec2 center{Vec2::Zero()};
  double radius{0.0};
};

/// Obstacle cycling through a closed waypoint loop at constant speed.
struct DynamicObstacle
{
  std::string name;
  std::vector<Vec2> path;
  double speed{0.0};
  double radius{0.0};

  Vec2 position_at(double t) const
  {
    if (path.size() < 2 || speed == 0.0) { return path.front(); }
    double perimeter = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) { perimeter += (path[(i + 1) % path.size()] - path[i]).norm(); }
    if (perimeter == 0.0) { return path.front(); }
    double s = std::fmod(speed * t, perimeter);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const Vec2 & a = path[i];
      const Vec2 & b = path[(i + 1) % path.size()];
      const double len = (b - a).norm();
      if (s <= len && len > 0.0) { return a + (s / len) * (b - a); }
      s -= len;
    }
    return path.front();
  }
};

struct HumanWaypoint
{
  double t{0.0};
  Vec2 position{Vec2::Zero()};
};

/// Person model parameters and a timed piecewise-linear reference path.
struct HumanSpec
{
  double sigma{0.0};
  double tracking_gain{1.0};
  std::vector<HumanWaypoint> path;

  ReferencePoint reference_at(double t) const
  {
    if (t <= path.front().t) { return {path.front().position, Vec2::Zero()}; }
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const auto & a = path[i];
      const auto & b = path[i + 1];
      if (t < b.t) {
        const Vec2 vel = (b.position - a.position) / (b.t - a.t);
        return {a.position + (t - a.t) * vel, vel};
      }
    }
    return {path.back().position, Vec2::Zero()};
  }
};

struct Scenario
{
  std::string name;
  std::map<std::string, RobotState> poses;
  RobotState start{};
  OmniModel model{};
  std::vector<StaticObstacle> static_obstacles;
  std::vector<DynamicObstacle> dynamic_obstacles;
  HumanSpec human;

  std::string mission_text;
  stl::Formula mission;
  stl::NameTable names;

  ControllerConfig controller{};
  FovParams fov{};
  std::vector<int> fov_legs;  ///< 1-based seq children with the FOV constraint
  BarrierConfig barrier{};

  double dt{0.02};
  double horizon{0.0};
  std::uint64_t seed{0};
  double detection_time{0.0};
  double detection_radius{0.0};  ///< 0 disables the proximity trigger

  nlohmann::json document;

  std::vector<Vec2> dynamic_positions(double t) const
  {
    std::vector<Vec2> out;
    out.reserve(dynamic_obstacles.size());
    for (const auto & d : dynamic_obstacles) { out.push_back(d.position_at(t)); }
    return out;
  }

  bool fov_active_in_leg(std::size_t phase) const
  {
    for (int leg : fov_legs) {
      if (leg == static_cast<int>(phase) + 1) { return true; }
    }
    return false;
  }
};

namespace detail {

using nlohmann::json;

inline const json & require(const json & j, const char * key, const std::string & where)
{
  if (!j.is_object() || !j.contains(key)) { throw ScenarioError(where + ": missing key '" + key + "'"); }
  return j.at(key);
}

inline double number(const json & j, const std::string & where)
{
  if (!j.is_number()) { throw ScenarioError(where + ": expected a number"); }
  return j.get<double>();
}

inline double number_or(const json & obj, const char * key, double fallback, const std::string & where)
{
  if (!obj.is_object() || !obj.contains(key)) { return fallback; }
  return number(obj.at(key), where + "." + key);
}

inline Vec2 point(const json & j, const std::string & where)
{
  if (!j.is_array() || j.size() < 2 || j.size() > 3) { throw ScenarioError(where + ": expected [x, y] or [x, y, theta]"); }
  return {number(j[0], where), number(j[1], where)};
}

inline RobotState pose(const json & j, const std::string & where)
{
  const Vec2 p = point(j, where);
  return {p.x(), p.y(), j.size() == 3 ? wrap_angle(number(j[2], where)) : 0.0};
}

}  // namespace detail

namespace detail {

inline Scenario load_scenario_unchecked(const nlohmann::json & doc)
{
  using detail::number;
  using detail::number_or;
  using detail::require;
  using nlohmann::json;

  if (!doc.is_object()) { throw ScenarioError("scenario: document must be an object"); }
  Scenario sc;
  sc.document = doc;
  sc.name = doc.value("name", std::string("scenario"));

  // poses
  const json & poses = require(doc, "poses", "scenario");
  if (!poses.is_object()) { throw ScenarioError("poses: expected an object"); }
  for (const auto & [name, value] : poses.items()) {
    sc.poses[name] = detail::pose(value, "poses." + name);
    sc.names.points[name] = sc.poses[name].position();
  }

  // robot
  const json empty = json::object();
  const json & robot = doc.contains("robot") ? doc.at("robot") : empty;
  try {
    sc.model = OmniModel(number_or(robot, "wheel_radius", 0.05, "robot"), number_or(robot, "chassis_radius", 0.2, "robot"));
  } catch (const std::invalid_argument & e) {
    throw ScenarioError(std::string("robot: ") + e.what());
  }
  const json & start = require(robot, "start", "robot");
  if (start.is_string()) {
    const auto it = sc.poses.find(start.get<std::string>());
    if (it == sc.poses.end()) { throw ScenarioError("robot.start: unresolved name '" + start.get<std::string>() + "'"); }
    sc.start = it->second;
  } else {
    sc.start = detail::pose(start, "robot.start");
  }

  // obstacles
  auto claim = [&sc](const std::string & name, const std::string & where) {
    if (sc.names.points.contains(name) || sc.names.dynamic.contains(name)) {
      throw ScenarioError(where + ": duplicate name '" + name + "'");
    }
  };
  if (doc.contains("obstacles")) {
    const json & obs = doc.at("obstacles");
    if (obs.contains("static")) {
      for (const auto & o : obs.at("static")) {
        StaticObstacle so;
        so.name = require(o, "name", "obstacles.static").get<std::string>();
        const std::string where = "obstacles.static." + so.name;
        so.center = detail::point(require(o, "center", where), where + ".center");
        so.radius = number(require(o, "radius", where), where + ".radius");
        if (!(so.radius > 0.0)) { throw ScenarioError(where + ".radius: must be positive"); }
        claim(so.name, where);
        sc.names.points[so.name] = so.center;
        sc.static_obstacles.push_back(std::move(so));
      }
    }
    if (obs.contains("dynamic")) {
      for (const auto & o : obs.at("dynamic")) {
        DynamicObstacle d;
        d.name = require(o, "name", "obstacles.dynamic").get<std::string>();
        const std::string where = "obstacles.dynamic." + d.name;
        for (const auto & p : require(o, "path", where)) { d.path.push_back(detail::point(p, where + ".path")); }
        if (d.path.empty()) { throw ScenarioError(where + ".path: needs at least one waypoint"); }
        d.speed = number(require(o, "speed", where), where + ".speed");
        d.radius = number_or(o, "radius", 0.3, where);
        if (d.speed < 0.0) { throw ScenarioError(where + ".speed: must be non-negative"); }
        claim(d.name, where);
        sc.names.dynamic[d.name] = static_cast<int>(sc.dynamic_obstacles.size());
        sc.dynamic_obstacles.push_back(std::move(d));
      }
    }
  }

  // human
  const json & human = require(doc, "human", "scenario");
  sc.human.sigma = number_or(human, "sigma", 0.0, "human");
  sc.human.tracking_gain = number_or(human, "tracking_gain", 1.0, "human");
  if (sc.human.sigma < 0.0) { throw ScenarioError("human.sigma: must be non-negative"); }
  for (const auto & w : require(human, "path", "human")) {
    HumanWaypoint hw;
    hw.t = number(require(w, "t", "human.path"), "human.path.t");
    const json & at = require(w, "at", "human.path");
    if (at.is_string()) {
      const auto it = sc.names.points.find(at.get<std::string>());
      if (it == sc.names.points.end()) { throw ScenarioError("human.path: unresolved name '" + at.get<std::string>() + "'"); }
      hw.position = it->second;
    } else {
      hw.position = detail::point(at, "human.path.at");
    }
    if (!sc.human.path.empty() && !(hw.t > sc.human.path.back().t)) {
      throw ScenarioError("human.path: waypoint times must be strictly increasing");
    }
    sc.human.path.push_back(hw);
  }
  if (sc.human.path.empty()) { throw ScenarioError("human.path: needs at least one waypoint"); }

  // controller
  const json & ctl = doc.contains("controller") ? doc.at("controller") : empty;
  if (ctl.contains("q_diag")) {
    const json & q = ctl.at("q_diag");
    if (!q.is_array() || q.size() != 3) { throw ScenarioError("controller.q_diag: expected three numbers"); }
    sc.controller.q_diagonal = Vec3(number(q[0], "controller.q_diag"), number(q[1], "controller.q_diag"),
                                    number(q[2], "controller.q_diag"));
  }
  sc.controller.v_max = number_or(ctl, "v_max", sc.controller.v_max, "controller");
  sc.controller.k_poly = static_cast<int>(number_or(ctl, "k_poly", sc.controller.k_poly, "controller"));
  sc.controller.kappa_stl = number_or(ctl, "kappa_stl", sc.controller.kappa_stl, "controller");
  sc.controller.u_max = number_or(ctl, "u_max", sc.controller.u_max, "controller");
  const std::string fallback = ctl.value("fallback", std::string("stop"));
  if (fallback != "stop") { throw ScenarioError("controller.fallback: only 'stop' is supported"); }
  sc.fov.beta = number_or(ctl, "beta", sc.fov.beta, "controller");
  sc.fov.kappa = number_or(ctl, "kappa_fov", sc.fov.kappa, "controller");
  const std::string axis = ctl.value("fov_axis", std::string("heading"));
  if (axis == "heading") {
    sc.fov.axis = FovAxis::Heading;
  } else if (axis == "paper_signs") {
    sc.fov.axis = FovAxis::PaperSigns;
  } else {
    throw ScenarioError("controller.fov_axis: expected 'heading' or 'paper_signs'");
  }
  if (ctl.contains("fov_legs")) {
    for (const auto & leg : ctl.at("fov_legs")) { sc.fov_legs.push_back(static_cast<int>(number(leg, "controller.fov_legs"))); }
  }
  if (ctl.contains("barrier")) {
    const json & b = ctl.at("barrier");
    sc.barrier.pad_extra = number_or(b, "pad_extra", sc.barrier.pad_extra, "controller.barrier");
    sc.barrier.gamma_inf = number_or(b, "gamma_inf", sc.barrier.gamma_inf, "controller.barrier");
    sc.barrier.gamma_cap = number_or(b, "gamma_cap", sc.barrier.gamma_cap, "controller.barrier");
    sc.barrier.settle_fraction = number_or(b, "settle_fraction", sc.barrier.settle_fraction, "controller.barrier");
  }
  try {
    sc.controller.validate();
    sc.fov.validate();
    sc.barrier.validate();
  } catch (const std::invalid_argument & e) {
    throw ScenarioError(std::string("controller: ") + e.what());
  }

  // sim
  const json & sim = require(doc, "sim", "scenario");
  sc.dt = number_or(sim, "dt", 0.02, "sim");
  sc.horizon = number(require(sim, "horizon", "sim"), "sim.horizon");
  const double seed = number_or(sim, "seed", 0.0, "sim");
  if (seed < 0.0 || seed != std::floor(seed)) { throw ScenarioError("sim.seed: expected a non-negative integer"); }
  sc.seed = static_cast<std::uint64_t>(seed);
  if (sim.contains("detection")) {
    const json & det = sim.at("detection");
    sc.detection_time = number_or(det, "time", 0.0, "sim.detection");
    sc.detection_radius = number_or(det, "radius", 0.0, "sim.detection");
  }
  if (!(sc.dt > 0.0)) { throw ScenarioError("sim.dt: must be positive"); }

  // mission
  const json & mission = require(doc, "mission", "scenario");
  if (!mission.is_string()) { throw ScenarioError("mission: expected an STL string"); }
  sc.mission_text = mission.get<std::string>();
  sc.mission = stl::parse_stl(sc.mission_text);
  try {
    stl::bind_names(sc.mission, sc.names);
  } catch (const stl::UnresolvedNameError & e) {
    throw ScenarioError(std::string("mission: ") + e.what());
  }
  if (sc.horizon + 1e-9 < stl::horizon(sc.mission)) {
    throw ScenarioError("sim.horizon " + format_double(sc.horizon) + " does not cover the mission deadline " +
                        format_double(stl::horizon(sc.mission)));
  }
  return sc;
}

}  // namespace detail

/**
 * Builds a validated scenario from its document. Sections: poses,
 * obstacles.static, obstacles.dynamic, human, mission, robot, controller, sim.
 */
inline Scenario load_scenario(const nlohmann::json & doc)
{
  try {
    return detail::load_scenario_unchecked(doc);
  } catch (const nlohmann::json::exception & e) {
    // wrong value types deep inside a section
    throw ScenarioError(std::string("scenario: ") + e.what());
  }
}

inline nlohmann::json read_scenario_document(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw std::ios_base::failure("cannot open scenario file '" + path + "'"); }
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str(), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error & e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }
}

inline Scenario load_scenario_file(const std::string & path)
{
  return load_scenario(read_scenario_document(path));
}

/// Numeric keys that may be set even when the document relies on their defaults.
inline const std::vector<std::string> & known_numeric_keys()
{
  static const std::vector<std::string> keys = {
    "robot.wheel_radius",   "robot.chassis_radius",       "human.sigma",
    "human.tracking_gain",  "controller.v_max",           "controller.k_poly",
    "controller.kappa_stl", "controller.u_max",           "controller.beta",
    "controller.kappa_fov", "controller.barrier.pad_extra", "controller.barrier.gamma_inf",
    "controller.barrier.gamma_cap", "controller.barrier.settle_fraction", "sim.dt",
    "sim.horizon",          "sim.seed",                   "sim.detection.time",
    "sim.detection.radius",
  };
  return keys;
}

/// Sets a numeric entry addressed by a dotted path, e.g. "controller.beta".
inline void set_numeric_key(nlohmann::json & doc, const std::string & dotted, double value)
{
  const auto & known = known_numeric_keys();
  const bool creatable = std::find(known.begin(), known.end(), dotted) != known.end();
  nlohmann::json * node = &doc;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || (!node->contains(key) && !creatable)) {
      throw ScenarioError("unknown scenario key '" + dotted + "'");
    }
    if (!node->contains(key)) { (*node)[key] = dot == std::string::npos ? nlohmann::json(0.0) : nlohmann::json::object(); }
    node = &(*node)[key];
    if (dot == std::string::npos) { break; }
    pos = dot + 1;
  }
  if (!node->is_number()) { throw ScenarioError("scenario key '" + dotted + "' is not numeric"); }
  *node = value;
}

}  // namespace srn
