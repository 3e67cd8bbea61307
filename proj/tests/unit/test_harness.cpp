#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "ptx/error.hpp"
#include "ptx/harness.hpp"

using namespace ptx;

namespace {

Scenario short_run(std::uint64_t seed, double hours) {
  Scenario s;
  s.seed = seed;
  s.duration_s = hours * 3600;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST(Harness, TickCountAndClock) {
  // Steady wind so deviation-triggered solves stay out of the count.
  Scenario sc = short_run(1, 2);
  sc.wind.kind = WindSourceKind::Constant;
  sc.wind.constant_mps = 12;
  const auto r = run_headless(sc);
  ASSERT_EQ(r.ticks.size(), 720u);
  EXPECT_DOUBLE_EQ(r.ticks.back().time_s, 7200);
  EXPECT_DOUBLE_EQ(r.final_state.sim_time_s, 7200);
  ASSERT_EQ(r.intervals.size(), 2u);
  EXPECT_EQ(r.intervals[0].start_s, 0);
  EXPECT_EQ(r.intervals[1].end_s, 7200);
  // initial + one periodic solve
  ASSERT_EQ(r.schedules.size(), 2u);
  EXPECT_EQ(r.schedules[0].reason, "initial");
  EXPECT_EQ(r.schedules[1].reason, "periodic");
}

TEST(Harness, IdenticalRunsGiveIdenticalArtifacts) {
  const auto a = run_headless(short_run(5, 12));
  const auto b = run_headless(short_run(5, 12));
  EXPECT_EQ(report_json_text(a), report_json_text(b));
  EXPECT_EQ(timeseries_csv_text(a), timeseries_csv_text(b));
  EXPECT_EQ(alarms_csv_text(a), alarms_csv_text(b));
  EXPECT_EQ(schedules_json_text(a), schedules_json_text(b));
  const auto c = run_headless(short_run(6, 12));
  EXPECT_NE(timeseries_csv_text(a), timeseries_csv_text(c));
}

TEST(Harness, RandomScenariosConserveMassAndEnergy) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto sc = random_scenario(seed, 6 * 3600);
    const auto r = run_headless(sc, RunOptions{false, true, false, false});
    const auto f = oracle::conservation_failures(r);
    EXPECT_TRUE(f.empty()) << seed << ": " << (f.empty() ? "" : f.front());
  }
}

TEST(Harness, VariableWindTriggersDeviationSolves) {
  const auto r = run_headless(short_run(1, 2));
  ASSERT_GE(r.schedules.size(), 2u);
  EXPECT_EQ(r.schedules[0].reason, "initial");
  for (std::size_t i = 1; i < r.schedules.size(); ++i) {
    const auto& why = r.schedules[i].reason;
    EXPECT_TRUE(why == "periodic" || why == "deviation") << why;
  }
}

TEST(Harness, TotalsMatchTickSums) {
  const auto r = run_headless(short_run(2, 6));
  double mkg = 0, used = 0;
  for (const auto& t : r.ticks) {
    mkg += t.methanol_kg;
    used += t.used_kw * 10 / 3600;
  }
  EXPECT_NEAR(r.totals.methanol_produced_kg, mkg, 1e-9 * (1 + mkg));
  EXPECT_NEAR(r.totals.energy_used_kwh, used, 1e-9 * (1 + used));
  double iv = 0;
  for (const auto& i : r.intervals) iv += i.totals.methanol_produced_kg;
  EXPECT_NEAR(iv, mkg, 1e-9 * (1 + mkg));
}

TEST(Harness, ZeroWindProducesNothing) {
  Scenario s = short_run(1, 24);
  s.wind.kind = WindSourceKind::Constant;
  s.wind.constant_mps = 0;
  const auto r = run_headless(s);
  EXPECT_EQ(r.totals.methanol_produced_kg, 0.0);
  EXPECT_EQ(r.totals.energy_available_kwh, 0.0);
}

TEST(Harness, StepAfterDoneIsAContractViolation) {
  Simulation sim(short_run(1, 10.0 / 3600));
  sim.step();
  EXPECT_TRUE(sim.done());
  EXPECT_THROW(sim.step(), ContractViolation);
}

TEST(Harness, OverrideCommandPinsNextSchedule) {
  Simulation sim(short_run(3, 3), RunOptions{false, false, false, true});
  for (int i = 0; i < 10; ++i) sim.step();
  ASSERT_TRUE(sim.queue().submit_override({1, 12345.0, "alice", "test"}));
  sim.step();
  auto sch = sim.active_schedule();
  ASSERT_TRUE(sch);
  EXPECT_EQ(sch->pinned_modules, (std::vector<std::size_t>{1}));
  for (double v : sch->setpoints_kw[1]) EXPECT_EQ(v, 12345.0);
  ASSERT_TRUE(sim.queue().submit_override({1, std::nullopt, "alice", ""}));
  sim.step();
  EXPECT_TRUE(sim.active_schedule()->pinned_modules.empty());
  auto rep = sim.take_report();
  ASSERT_GE(rep.schedules.size(), 3u);
  EXPECT_EQ(rep.schedules[1].reason, "override");
  EXPECT_EQ(rep.schedules[2].reason, "override");
  bool applied = false, released = false;
  for (const auto& a : rep.alarms) {
    applied |= a.code == "OVERRIDE_APPLIED";
    released |= a.code == "OVERRIDE_RELEASED";
  }
  EXPECT_TRUE(applied);
  EXPECT_TRUE(released);
}

TEST(CommandQueue, SingleOperatorPerModule) {
  CommandQueue q;
  EXPECT_TRUE(q.submit_override({0, 10.0, "alice", ""}));
  EXPECT_FALSE(q.submit_override({0, 20.0, "bob", ""}));
  EXPECT_EQ(q.holder(0), "alice");
  EXPECT_TRUE(q.submit_override({0, 30.0, "alice", ""}));  // holder may update
  EXPECT_TRUE(q.submit_override({1, 5.0, "bob", ""}));      // other module is free
  EXPECT_TRUE(q.submit_override({0, std::nullopt, "alice", ""}));
  EXPECT_FALSE(q.holder(0));
  EXPECT_TRUE(q.submit_override({0, 20.0, "bob", ""}));
  const auto cmds = q.drain();
  ASSERT_EQ(cmds.size(), 5u);
  for (std::size_t i = 1; i < cmds.size(); ++i) EXPECT_GT(cmds[i].id, cmds[i - 1].id);
  EXPECT_TRUE(q.empty());
}

TEST(CommandQueue, SwapPendingUntilApplied) {
  Simulation sim(short_run(1, 1));
  sim.step();
  sim.queue().submit_scenario({"low-wind", {}, std::nullopt});
  EXPECT_TRUE(sim.queue().swap_pending());
  sim.step();
  EXPECT_FALSE(sim.queue().swap_pending());
  sim.queue().submit_scenario({"", {}, 600.0});  // ship call alone is not a swap
  EXPECT_FALSE(sim.queue().swap_pending());
}

TEST(Harness, PresetSwapKeepsWindContinuous) {
  Simulation sim(short_run(4, 2));
  for (int i = 0; i < 100; ++i) sim.step();
  const double before = sim.state().wind_mps;
  sim.queue().submit_scenario({"high-dynamics", {}, std::nullopt});
  sim.step();
  EXPECT_NEAR(sim.state().wind_mps, before, 1.0);
  auto rep = sim.take_report();
  EXPECT_EQ(rep.schedules.back().reason, "scenario");
}

TEST(EventBus, OrderedAndBounded) {
  EventBus bus(4);
  for (int i = 0; i < 10; ++i) bus.publish("frame", std::to_string(i));
  EXPECT_EQ(bus.last_seq(), 10u);
  const auto ev = bus.since(0, 0);
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_EQ(ev.front().seq, 7u);
  EXPECT_EQ(ev.back().data, "9");
  EXPECT_TRUE(bus.since(10, 0).empty());
}

TEST(EventBus, WaitersWakeOnPublish) {
  EventBus bus;
  std::thread t([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    bus.publish("alarm", "{}");
  });
  const auto ev = bus.since(0, 5000);
  t.join();
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].type, "alarm");
  bus.close();
  EXPECT_TRUE(bus.closed());
  EXPECT_TRUE(bus.since(1, 5000).empty());  // returns immediately once closed
}

TEST(Artifacts, FilesAndHeaders) {
  const auto r = run_headless(short_run(1, 1));
  const auto dir = std::filesystem::temp_directory_path() / "ptx_artifacts_test";
  std::filesystem::remove_all(dir);
  emit_report(r, dir.string());
  for (const char* f : {"report.json", "timeseries.csv", "alarms.csv", "schedules.json", "runtime.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto ts = slurp(dir / "timeseries.csv");
  EXPECT_EQ(ts.rfind("time_s,wind_mps,available_kw,used_kw,curtailed_kw,load_desalination_kw", 0), 0u);
  EXPECT_EQ(count_lines(ts), 361u);
  EXPECT_EQ(slurp(dir / "alarms.csv").rfind("time_s,severity,code,node,message\n", 0), 0u);
  const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(rep.at("ticks"), 360);
  EXPECT_FALSE(rep.contains("wall_clock_s"));
  for (const auto& b : rep.at("mass_balance")) EXPECT_LE(b.at("relative_residual").get<double>(), 1e-9);
  const auto rt = nlohmann::json::parse(slurp(dir / "runtime.json"));
  EXPECT_TRUE(rt.contains("wall_clock_s"));
  EXPECT_EQ(slurp(dir / "report.json"), report_json_text(r));
}

TEST(Artifacts, UnwritableDirectoryIsAnIoError) {
  const auto r = run_headless(short_run(1, 0.5));
  EXPECT_THROW(emit_report(r, "/proc/ptx_cannot_write_here"), IoError);
}

TEST(ExitCodes, ByErrorClass) {
  EXPECT_EQ(exit_code_for(ValidationError("x")), 1);
  EXPECT_EQ(exit_code_for(ParseError("f", "x")), 1);
  EXPECT_EQ(exit_code_for(InvalidSetpoint("x")), 1);
  EXPECT_EQ(exit_code_for(IoError("x")), 2);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 2);
  EXPECT_EQ(exit_code_for(PowerInfeasible("x")), 3);
  EXPECT_EQ(exit_code_for(FeasibilityCheckFailed("x")), 3);
  EXPECT_EQ(exit_code_for(ContractViolation("x")), 3);
}
