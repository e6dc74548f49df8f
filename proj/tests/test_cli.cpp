#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "srn/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result
{
  int code;
  std::string out;
};

// Runs the srn binary and captures stdout and stderr together.
Result srn_cli(const std::string & args)
{
  const std::string cmd = std::string(SRN_CLI_PATH) + " " + args + " 2>&1";
  FILE * pipe = popen(cmd.c_str(), "r");
  Result r{-1, {}};
  if (pipe == nullptr) { return r; }
  std::array<char, 4096> buf{};
  while (const std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) { r.out.append(buf.data(), n); }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scenario(const std::string & name) { return std::string(SRN_SOURCE_DIR) + "/scenarios/" + name; }

fs::path scratch(const std::string & name)
{
  const fs::path dir = fs::temp_directory_path() / ("srn_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double robustness_line(const std::string & out)
{
  std::istringstream in(out);
  std::string word;
  while (in >> word) {
    if (word == "robustness") {
      std::string value;
      in >> value;
      return *srn::parse_double(value);
    }
  }
  return std::nan("");
}

}  // namespace

TEST(CliRun, MissingFileIsUsageError)
{
  const Result r = srn_cli("run " + scenario("does_not_exist.scenario") + " -o " + scratch("missing").string());
  EXPECT_EQ(r.code, 2);
  const auto rec = nlohmann::json::parse(r.out);
  EXPECT_EQ(rec.at("error").at("kind").get<std::string>(), "io");
}

TEST(CliRun, NoArgumentsIsUsageError)
{
  EXPECT_EQ(srn_cli("").code, 2);
  EXPECT_EQ(srn_cli("run").code, 2);
}

TEST(CliRun, SeedOverrideAndReplay)
{
  const fs::path dir = scratch("run");
  const Result r = srn_cli("run " + scenario("deadline_reachable.scenario") + " --seed 9 -o " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  ASSERT_TRUE(fs::exists(dir / "trace.csv"));
  ASSERT_TRUE(fs::exists(dir / "margins.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary.at("seed").get<std::uint64_t>(), 9u);
  const double rho = summary.at("robustness").get<double>();
  EXPECT_GT(rho, 0.0);
  EXPECT_EQ(robustness_line(r.out), rho);

  const Result byscenario = srn_cli("monitor " + (dir / "trace.csv").string() + " --scenario " +
                                    scenario("deadline_reachable.scenario"));
  EXPECT_EQ(byscenario.code, 0) << byscenario.out;
  EXPECT_EQ(robustness_line(byscenario.out), rho);

  const Result inline_mission = srn_cli("monitor " + (dir / "trace.csv").string() + " --mission 'F[0,10] reach(goal,0.1)'");
  EXPECT_EQ(inline_mission.code, 0) << inline_mission.out;
  EXPECT_EQ(robustness_line(inline_mission.out), rho);
}

TEST(CliMonitor, ViolatingTraceExitsOne)
{
  const fs::path dir = scratch("monitor");
  srn::Trace t;
  t.dt = 0.5;
  t.names.points["goal"] = srn::Vec2(5.0, 0.0);
  for (int k = 0; k <= 4; ++k) {
    srn::TraceSample s;
    s.t = 0.5 * k;
    t.samples.push_back(s);
  }
  {
    std::ofstream out(dir / "trace.csv");
    srn::write_trace_csv(out, t);
  }
  const Result r = srn_cli("monitor " + (dir / "trace.csv").string() + " --mission 'F[0,2] reach(goal, 1)'");
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_EQ(robustness_line(r.out), -4.0);
}

TEST(CliMonitor, ColumnMismatchIsUsageError)
{
  const fs::path dir = scratch("mismatch");
  {
    std::ofstream out(dir / "trace.csv");
    out << "t,x,y\n0,0,0\n";
  }
  const Result r = srn_cli("monitor " + (dir / "trace.csv").string() + " --mission 'F[0,1] reach(goal, 1)'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("column"), std::string::npos);
}

TEST(CliMonitor, NeedsAMission)
{
  EXPECT_EQ(srn_cli("monitor somewhere.csv").code, 2);
}

TEST(CliSweep, ThreeBetasThreeRows)
{
  const fs::path dir = scratch("sweep");
  const Result r = srn_cli("sweep " + scenario("deadline_reachable.scenario") +
                           " --grid controller.beta=pi/3,pi/2,2pi/3 --jobs 2 -o " + (dir / "sweep.csv").string());
  EXPECT_EQ(r.code, 0) << r.out;
  std::istringstream table(slurp(dir / "sweep.csv"));
  std::string line;
  std::getline(table, line);
  EXPECT_EQ(line.rfind("controller.beta,robustness,satisfied,", 0), 0u);
  std::vector<std::string> rows;
  while (std::getline(table, line)) { rows.push_back(line); }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].rfind(srn::format_double(std::numbers::pi / 2.0) + ",", 0), 0u);
}

TEST(CliSweep, GridErrors)
{
  EXPECT_EQ(srn_cli("sweep " + scenario("deadline_reachable.scenario")).code, 2);
  EXPECT_EQ(srn_cli("sweep " + scenario("deadline_reachable.scenario") + " --grid controller.bogus=1,2").code, 2);
  EXPECT_EQ(srn_cli("sweep " + scenario("deadline_reachable.scenario") + " --grid controller.beta=").code, 2);
}

TEST(CliGrid, ValueForms)
{
  using srn::cli::parse_grid_value;
  EXPECT_EQ(*parse_grid_value("0.25"), 0.25);
  EXPECT_EQ(*parse_grid_value("pi"), std::numbers::pi);
  EXPECT_EQ(*parse_grid_value("2pi/3"), 2.0 * std::numbers::pi / 3.0);
  EXPECT_EQ(*parse_grid_value("-pi/4"), -std::numbers::pi / 4.0);
  EXPECT_FALSE(parse_grid_value("abc").has_value());
  EXPECT_FALSE(parse_grid_value("1/0").has_value());
}
