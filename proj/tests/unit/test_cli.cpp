#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result ptxsim(const std::string& args) {
  const std::string cmd = std::string(PTXSIM_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path workdir() {
  const auto d = fs::temp_directory_path() / "ptx_cli_test";
  fs::create_directories(d);
  return d;
}

std::string write(const std::string& name, const std::string& body) {
  const auto p = workdir() / name;
  std::ofstream(p) << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(Cli, ValidateAcceptsGoodScenario) {
  const auto sc = write("ok.json", R"({"name":"smoke","duration_s":3600})");
  const auto r = ptxsim("validate " + sc);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("smoke"), std::string::npos);
}

TEST(Cli, ValidateEchoPrintsEffectiveScenario) {
  const auto sc = write("echo.json", R"({"name":"e","duration_s":3600})");
  const auto r = ptxsim("validate --echo " + sc);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("name"), "e");
  EXPECT_EQ(j.at("dt_sim_s"), 10.0);
  EXPECT_EQ(j.at("modules").size(), 3u);
}

TEST(Cli, InvalidInputExitsWithOne) {
  EXPECT_EQ(ptxsim("validate " + write("bad.json", R"({"bogus":1})")).code, 1);
  EXPECT_EQ(ptxsim("validate " + write("broken.json", "{\"name\":")).code, 1);
  EXPECT_EQ(ptxsim("run " + write("p.json", R"({"duration_s":3600})") + " --preset calm").code, 1);
  EXPECT_EQ(ptxsim("frobnicate").code, 1);
  EXPECT_EQ(ptxsim("").code, 1);
}

TEST(Cli, RuntimeFailuresExitWithTwo) {
  EXPECT_EQ(ptxsim("validate /nonexistent/scenario.json").code, 2);
  const auto sc = write("rt.json", R"({"duration_s":600})");
  EXPECT_EQ(ptxsim("run " + sc + " --out /proc/ptx_no_such_dir").code, 2);
}

TEST(Cli, RunWritesDeterministicArtifacts) {
  const auto sc = write("det.json", R"({"name":"det","duration_s":7200,"seed":4})");
  const auto a = workdir() / "run_a";
  const auto b = workdir() / "run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(ptxsim("run " + sc + " --out " + a.string()).code, 0);
  ASSERT_EQ(ptxsim("run " + sc + " --out " + b.string()).code, 0);
  for (const char* f : {"report.json", "timeseries.csv", "alarms.csv", "schedules.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a / "runtime.json"));
  // --seed overrides the file
  const auto c = workdir() / "run_c";
  fs::remove_all(c);
  ASSERT_EQ(ptxsim("run " + sc + " --seed 5 --out " + c.string()).code, 0);
  EXPECT_NE(slurp(a / "timeseries.csv"), slurp(c / "timeseries.csv"));
}

TEST(Cli, WhatIfPrintsTrajectory) {
  const auto sc = write("wi.json", R"({"duration_s":3600})");
  const auto sp = write("sp.json", R"({"setpoints":[[50,30000,3000]],"setpoint_step_s":600,"wind_mps":[11]})");
  const auto r = ptxsim("whatif " + sc + " --setpoints " + sp);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("time_s").size(), 60u);
  const auto bad = write("bad_sp.json", R"({"setpoints":[[1,2]]})");
  EXPECT_EQ(ptxsim("whatif " + sc + " --setpoints " + bad).code, 1);
}
