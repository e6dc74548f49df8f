#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "srn/format.hpp"
#include "srn/scenario.hpp"
#include "srn/simulator.hpp"
#include "srn/stl.hpp"
#include "srn/trace.hpp"

namespace srn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnsatisfied = 1;
inline constexpr int kExitUsage = 2;

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

/// SRN_LOG=quiet|info|debug, default info.
inline LogLevel log_level()
{
  const char * env = std::getenv("SRN_LOG");
  if (env == nullptr) { return LogLevel::Info; }
  const std::string v(env);
  if (v == "quiet" || v == "0") { return LogLevel::Quiet; }
  if (v == "debug" || v == "2") { return LogLevel::Debug; }
  return LogLevel::Info;
}

inline void log(LogLevel level, const std::string & msg)
{
  if (static_cast<int>(level) <= static_cast<int>(log_level())) { std::clog << "[srn] " << msg << "\n"; }
}

/// Machine-readable error record: {"error": {"kind": ..., "message": ..., ...}}.
inline nlohmann::json error_record(const std::string & kind, const std::string & message)
{
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

/// Maps a load/parse exception to an error record.
inline nlohmann::json describe_exception(std::exception_ptr ep)
{
  try {
    std::rethrow_exception(ep);
  } catch (const stl::ParseError & e) {
    auto rec = error_record(e.reason() == stl::ParseError::Reason::Syntax ? "stl_syntax" : "stl_invalid", e.what());
    rec["error"]["line"] = e.location().line;
    rec["error"]["column"] = e.location().column;
    return rec;
  } catch (const stl::FragmentError & e) {
    auto rec = error_record("stl_fragment", e.what());
    for (const auto & v : e.violations()) { rec["error"]["violations"].push_back({{"path", v.path}, {"message", v.message}}); }
    return rec;
  } catch (const stl::UnresolvedNameError & e) {
    auto rec = error_record("unresolved_name", e.what());
    rec["error"]["name"] = e.name();
    return rec;
  } catch (const ScenarioError & e) {
    return error_record("schema", e.what());
  } catch (const TraceFormatError & e) {
    return error_record("trace_format", e.what());
  } catch (const stl::HorizonError & e) {
    return error_record("horizon", e.what());
  } catch (const std::ios_base::failure & e) {
    return error_record("io", e.what());
  } catch (const nlohmann::json::exception & e) {
    return error_record("schema", e.what());
  } catch (const std::exception & e) {
    return error_record("internal", e.what());
  }
}

inline nlohmann::json margin_json(const WorstMargin & m)
{
  if (!std::isfinite(m.value)) { return nullptr; }
  return {{"value", m.value}, {"time", m.time}, {"violations", m.violations}};
}

inline nlohmann::json summary_json(const Scenario & sc, const RunReport & r)
{
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["seed"] = r.seed;
  j["robustness"] = r.robustness();
  j["satisfied"] = r.satisfied();
  j["hard_violations"] = r.check.hard_violations();
  j["fov_margin"] = margin_json(r.check.fov);
  j["velocity_margin"] = margin_json(r.check.velocity);
  j["v_max"] = sc.controller.v_max;
  j["avoid"] = nlohmann::json::array();
  for (const auto & a : r.check.avoid) {
    j["avoid"].push_back({{"name", a.name}, {"radius", a.radius}, {"window", {a.window.lower, a.window.upper}},
                          {"margin", margin_json(a.worst)}});
  }
  j["reach"] = nlohmann::json::array();
  for (const auto & a : r.check.reach) {
    j["reach"].push_back({{"name", a.name}, {"radius", a.radius}, {"window", {a.window.lower, a.window.upper}},
                          {"arrival", a.arrival ? nlohmann::json(*a.arrival) : nlohmann::json(nullptr)}});
  }
  j["infeasible_steps"] = r.check.infeasible_steps;
  j["first_infeasible"] = r.check.first_infeasible ? nlohmann::json(*r.check.first_infeasible) : nlohmann::json(nullptr);
  j["detection_time"] = r.detection_time ? nlohmann::json(*r.detection_time) : nlohmann::json(nullptr);
  j["start_infeasible"] = r.start_infeasible;
  j["samples"] = r.trace.samples.size();
  j["dt"] = r.trace.dt;
  j["wall_clock_s"] = r.wall_clock;
  return j;
}

/// family,name,worst_margin,time,violations
inline void write_margins_csv(std::ostream & out, const TraceCheck & c)
{
  out << "family,name,worst_margin,time,violations\n";
  auto row = [&out](const std::string & fam, const std::string & name, const WorstMargin & m) {
    out << fam << "," << name << "," << (std::isfinite(m.value) ? format_double(m.value) : "") << ","
        << (std::isfinite(m.value) ? format_double(m.time) : "") << "," << m.violations << "\n";
  };
  row("fov", "h", c.fov);
  row("velocity", "v_max-|v|", c.velocity);
  for (const auto & a : c.avoid) { row("avoid", a.name, a.worst); }
}

inline std::string read_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw std::ios_base::failure("cannot open '" + path + "'"); }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunOptions
{
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir{"out"};
};

/// Runs a scenario and writes trace.csv, margins.csv and summary.json.
inline int cmd_run(const RunOptions & opt, std::ostream & out, std::ostream & err)
{
  Scenario sc;
  try {
    sc = load_scenario_file(opt.scenario_path);
  } catch (...) {
    err << describe_exception(std::current_exception()).dump() << "\n";
    return kExitUsage;
  }
  if (opt.seed) { sc.seed = *opt.seed; }
  log(LogLevel::Info, "running '" + sc.name + "' seed " + std::to_string(sc.seed) + " horizon " + format_double(sc.horizon) + " s");

  const RunReport report = run(sc);

  try {
    namespace fs = std::filesystem;
    fs::create_directories(opt.output_dir);
    const fs::path dir(opt.output_dir);
    std::ofstream trace_out(dir / "trace.csv");
    write_trace_csv(trace_out, report.trace);
    std::ofstream margins_out(dir / "margins.csv");
    write_margins_csv(margins_out, report.check);
    std::ofstream summary_out(dir / "summary.json");
    summary_out << summary_json(sc, report).dump(2) << "\n";
    if (!trace_out || !margins_out || !summary_out) { throw std::ios_base::failure("failed writing to '" + opt.output_dir + "'"); }
  } catch (...) {
    err << describe_exception(std::current_exception()).dump() << "\n";
    return kExitUsage;
  }

  out << "robustness " << format_double(report.robustness()) << "\n";
  out << "infeasible_steps " << report.check.infeasible_steps << "\n";
  out << "hard_violations " << report.check.hard_violations() << "\n";
  out << "seed " << report.seed << "\n";
  return report.satisfied() ? kExitOk : kExitUnsatisfied;
}

struct MonitorOptions
{
  std::string trace_path;
  std::optional<std::string> mission;
  std::optional<std::string> scenario_path;
};

/// Prints robustness and the violation timeline of a stored trace.
inline int cmd_monitor(const MonitorOptions & opt, std::ostream & out, std::ostream & err)
{
  try {
    if (!opt.mission && !opt.scenario_path) {
      err << error_record("usage", "monitor needs --mission or --scenario").dump() << "\n";
      return kExitUsage;
    }
    const Trace trace = trace_from_csv(read_file(opt.trace_path));

    double v_max = std::numeric_limits<double>::infinity();
    stl::Formula mission;
    stl::NameTable names = trace.names;
    if (opt.scenario_path) {
      const Scenario sc = load_scenario_file(*opt.scenario_path);
      v_max = sc.controller.v_max;
      names = sc.names;
      mission = sc.mission;
    }
    if (opt.mission) {
      mission = stl::parse_stl(*opt.mission);
      stl::bind_names(mission, names);
    }

    const TraceCheck check = check_trace(trace, mission, v_max);
    out << "robustness " << format_double(check.robustness) << "\n";
    if (std::isfinite(check.fov.value)) {
      out << "worst fov " << format_double(check.fov.value) << " at t=" << format_double(check.fov.time) << "\n";
    }
    if (std::isfinite(v_max)) {
      out << "worst velocity " << format_double(check.velocity.value) << " at t=" << format_double(check.velocity.time) << "\n";
    }
    for (const auto & a : check.avoid) {
      out << "worst avoid " << a.name << " " << format_double(a.worst.value) << " at t=" << format_double(a.worst.time) << "\n";
    }
    for (const auto & e : check.timeline) {
      out << "violation t=" << format_double(e.t) << " " << to_string(e.family) << " " << e.what << " "
          << format_double(e.margin) << "\n";
    }
    return check.robustness > 0.0 ? kExitOk : kExitUnsatisfied;
  } catch (...) {
    err << describe_exception(std::current_exception()).dump() << "\n";
    return kExitUsage;
  }
}

/// Parses a number, "pi", or a ratio such as "2pi/3", "2*pi/3", "-pi/4".
inline std::optional<double> parse_grid_value(std::string text)
{
  text.erase(std::remove_if(text.begin(), text.end(), [](char c) { return c == ' '; }), text.end());
  if (text.empty()) { return std::nullopt; }
  double denom = 1.0;
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const auto d = parse_double(text.substr(slash + 1));
    if (!d || *d == 0.0) { return std::nullopt; }
    denom = *d;
    text = text.substr(0, slash);
  }
  double value = 0.0;
  if (const auto pi = text.find("pi"); pi != std::string::npos) {
    if (pi + 2 != text.size()) { return std::nullopt; }
    std::string coeff = text.substr(0, pi);
    if (!coeff.empty() && coeff.back() == '*') { coeff.pop_back(); }
    double c = 1.0;
    if (coeff == "-") {
      c = -1.0;
    } else if (!coeff.empty()) {
      const auto parsed = parse_double(coeff);
      if (!parsed) { return std::nullopt; }
      c = *parsed;
    }
    value = c * std::numbers::pi;
  } else {
    const auto parsed = parse_double(text);
    if (!parsed) { return std::nullopt; }
    value = *parsed;
  }
  return value / denom;
}

struct GridAxis
{
  std::string key;
  std::vector<double> values;
};

inline GridAxis parse_grid_axis(const std::string & spec)
{
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) { throw std::invalid_argument("grid spec '" + spec + "' must look like KEY=v1,v2"); }
  GridAxis axis{spec.substr(0, eq), {}};
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_grid_value(item);
    if (!v) { throw std::invalid_argument("grid value '" + item + "' is not a number"); }
    axis.values.push_back(*v);
  }
  if (axis.values.empty()) { throw std::invalid_argument("grid axis '" + axis.key + "' has no values"); }
  return axis;
}

struct SweepOptions
{
  std::string scenario_path;
  std::vector<std::string> grid;
  std::optional<std::string> output_path;
  unsigned jobs{0};  ///< 0: hardware concurrency
};

struct SweepRow
{
  std::vector<double> point;
  double robustness{0.0};
  bool satisfied{false};
  double fov_margin{0.0};
  double velocity_margin{0.0};
  double avoid_margin{0.0};
  std::size_t infeasible{0};
  double wall_clock{0.0};
};

/// Cartesian grid over numeric scenario keys; one row per point in grid order.
inline int cmd_sweep(const SweepOptions & opt, std::ostream & out, std::ostream & err)
{
  std::vector<GridAxis> axes;
  nlohmann::json base;
  std::vector<nlohmann::json> docs;
  std::vector<std::vector<double>> points;
  try {
    if (opt.grid.empty()) { throw std::invalid_argument("empty grid: pass at least one --grid KEY=v1,v2"); }
    for (const auto & g : opt.grid) { axes.push_back(parse_grid_axis(g)); }
    base = read_scenario_document(opt.scenario_path);

    std::size_t total = 1;
    for (const auto & ax : axes) { total *= ax.values.size(); }
    for (std::size_t n = 0; n < total; ++n) {
      // mixed radix, last axis fastest
      std::vector<double> point(axes.size());
      std::size_t rest = n;
      for (std::size_t a = axes.size(); a-- > 0;) {
        point[a] = axes[a].values[rest % axes[a].values.size()];
        rest /= axes[a].values.size();
      }
      nlohmann::json doc = base;
      for (std::size_t a = 0; a < axes.size(); ++a) { set_numeric_key(doc, axes[a].key, point[a]); }
      load_scenario(doc);  // validate every grid point before running any
      docs.push_back(std::move(doc));
      points.push_back(std::move(point));
    }
  } catch (const std::invalid_argument & e) {
    err << error_record("usage", e.what()).dump() << "\n";
    return kExitUsage;
  } catch (...) {
    err << describe_exception(std::current_exception()).dump() << "\n";
    return kExitUsage;
  }

  std::vector<SweepRow> rows(docs.size());
  auto work = [&](std::size_t i) {
    const Scenario sc = load_scenario(docs[i]);
    const RunReport r = run(sc);
    SweepRow row;
    row.point = points[i];
    row.robustness = r.robustness();
    row.satisfied = r.satisfied();
    row.fov_margin = r.check.fov.value;
    row.velocity_margin = r.check.velocity.value;
    row.avoid_margin = r.check.min_avoid_margin();
    row.infeasible = r.check.infeasible_steps;
    row.wall_clock = r.wall_clock;
    rows[i] = row;
  };
  const unsigned jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < docs.size(); begin += jobs) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = begin; i < std::min(docs.size(), begin + jobs); ++i) {
      batch.push_back(std::async(std::launch::async, work, i));
    }
    for (auto & f : batch) { f.get(); }
  }

  std::ofstream file;
  if (opt.output_path) {
    file.open(*opt.output_path);
    if (!file) {
      err << error_record("io", "cannot write '" + *opt.output_path + "'").dump() << "\n";
      return kExitUsage;
    }
  }
  std::ostream & table = opt.output_path ? static_cast<std::ostream &>(file) : out;
  for (const auto & a : axes) { table << a.key << ","; }
  table << "robustness,satisfied,min_fov_margin,min_velocity_margin,min_avoid_margin,infeasible_steps,wall_clock_s\n";
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  bool all = true;
  for (const auto & r : rows) {
    for (double v : r.point) { table << format_double(v) << ","; }
    table << num(r.robustness) << "," << (r.satisfied ? 1 : 0) << "," << num(r.fov_margin) << "," << num(r.velocity_margin)
          << "," << num(r.avoid_margin) << "," << r.infeasible << "," << format_double(r.wall_clock) << "\n";
    all = all && r.satisfied;
  }
  return all ? kExitOk : kExitUnsatisfied;
}

}  // namespace srn::cli
