#include <gtest/gtest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include "ptx/error.hpp"
#include "ptx/harness.hpp"
#include "ptx/twin.hpp"

using namespace ptx;

namespace {

std::size_t count_nodes(const InfoNode& n) {
  std::size_t c = 1;
  for (const auto& ch : n.children) c += count_nodes(ch);
  return c;
}

PlantState running(const PlantTopology& topo, std::vector<double> loads) {
  PlantState s = initial_state(topo);
  for (std::size_t m = 0; m < loads.size(); ++m) {
    if (loads[m] > 0) s.modules[m] = {ModuleMode::Running, 0.0, loads[m], loads[m]};
  }
  return s;
}

}  // namespace

TEST(InformationModel, HierarchyFollowsTopology) {
  const auto topo = default_topology();
  const auto m = build_information_model(topo);
  EXPECT_EQ(m.id, "platform");
  EXPECT_EQ(m.type, NodeType::Platform);
  // 3 platform sensors, 3 modules x (1 + 6), 4 storages x (1 + 5), root.
  EXPECT_EQ(count_nodes(m), 1u + 3 + 3 * 7 + 4 * 6);
  ASSERT_NE(m.find("electrolysis"), nullptr);
  EXPECT_EQ(m.find("electrolysis")->type, NodeType::Module);
  ASSERT_NE(m.find("hydrogen_tank.level"), nullptr);
  EXPECT_EQ(m.find("hydrogen_tank.level")->type, NodeType::Sensor);
  EXPECT_EQ(m.find("nope"), nullptr);
}

TEST(InformationModel, DuplicateIdsRejected) {
  auto topo = default_topology();
  topo.modules[0].name = "platform";
  EXPECT_THROW(build_information_model(topo), DuplicateName);
  topo = default_topology();
  topo.storages[0].name = "electrolysis";
  EXPECT_THROW(build_information_model(topo), DuplicateName);
}

TEST(Registry, TagsEveryNode) {
  const auto topo = default_topology();
  const auto reg = build_model_registry(topo);
  std::size_t behaviour = 0, data = 0, info = 0;
  for (const auto& e : reg) {
    behaviour += e.tag == ModelTag::BehaviouralModel;
    data += e.tag == ModelTag::DataModel;
    info += e.tag == ModelTag::InformationModel;
  }
  EXPECT_EQ(info, 1u);
  EXPECT_EQ(behaviour, 7u);
  EXPECT_EQ(data, 3u + 18 + 20);
  // The module behaviour entry is the live step function.
  EXPECT_EQ(reg[1].behaviour, &step_module);
}

TEST(Twin, FlushKeepsLatestInSync) {
  const auto topo = default_topology();
  DigitalTwin twin(topo);
  auto s = running(topo, {50, 30000, 3000});
  const std::vector<double> cmd{50, 30000, 3000};
  for (int i = 0; i < 50; ++i) {
    s = step_plant(topo, s, cmd, {}, 12, 10).state;
    twin.flush(s);
    ASSERT_TRUE(sync_mismatches(twin, s).empty()) << i;
  }
  EXPECT_EQ(twin.stream_size("electrolysis", "load_kw"), 50u);
  EXPECT_EQ(twin.unit_of("hydrogen_tank", "level"), "kg");
  EXPECT_EQ(twin.unit_of("platform", "wind_mps"), "m/s");
}

TEST(Twin, IngestRejectsUnknownNodeAtomically) {
  DigitalTwin twin(default_topology());
  std::vector<TelemetryRecord> batch{{1, "platform", "wind_mps", 5, "m/s"},
                                     {1, "ghost", "level", 1, "kg"}};
  EXPECT_THROW(twin.ingest(batch), UnknownNode);
  EXPECT_EQ(twin.stream_size("platform", "wind_mps"), 0u);  // nothing applied
  batch[1] = {1, "platform", "bogus", 1, ""};
  EXPECT_THROW(twin.ingest(batch), UnknownNode);
}

TEST(Twin, TimeRegressionRejectedAndCounted) {
  DigitalTwin twin(default_topology());
  std::vector<TelemetryRecord> a{{10, "platform", "wind_mps", 5, "m/s"}};
  twin.ingest(a);
  std::vector<TelemetryRecord> b{{5, "platform", "wind_mps", 6, "m/s"},
                                 {12, "platform", "wind_mps", 7, "m/s"}};
  EXPECT_THROW(twin.ingest(b), TimeRegression);
  EXPECT_EQ(twin.rejected_count(), 1u);
  EXPECT_EQ(twin.stream_size("platform", "wind_mps"), 2u);  // the in-order record landed
  EXPECT_EQ(twin.latest("platform", "wind_mps")->value, 7);
  // Equal timestamps are allowed.
  std::vector<TelemetryRecord> c{{12, "platform", "wind_mps", 8, "m/s"}};
  EXPECT_NO_THROW(twin.ingest(c));
}

TEST(Twin, HistoryRangeQueryIsInclusive) {
  DigitalTwin twin(default_topology());
  for (int i = 0; i < 10000; ++i) {
    std::vector<TelemetryRecord> r{{i * 10.0, "platform", "wind_mps", double(i), "m/s"}};
    twin.ingest(r);
  }
  const auto h = twin.query_history("platform", "wind_mps", 100, 200);
  ASSERT_EQ(h.size(), 11u);
  EXPECT_EQ(h.front().time_s, 100);
  EXPECT_EQ(h.back().time_s, 200);
  EXPECT_TRUE(twin.query_history("platform", "wind_mps", 1e9, 2e9).empty());
  EXPECT_THROW(twin.query_history("platform", "wind_mps", 5, 1), ContractViolation);
  EXPECT_THROW(twin.query_history("x", "y", 0, 1), UnknownNode);
}

TEST(Twin, ConcurrentReadersSeeConsistentPrefixes) {
  DigitalTwin twin(default_topology());
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      while (!done) {
        const auto h = twin.query_history("platform", "wind_mps", 0, 1e12);
        for (std::size_t i = 0; i < h.size(); ++i) {
          if (h[i].time_s != double(i) || h[i].value != double(i) * 2) ++bad;
        }
      }
    });
  }
  for (int i = 0; i < 3 * int(TelemetryLog::kChunk); ++i) {
    std::vector<TelemetryRecord> rec{{double(i), "platform", "wind_mps", double(i) * 2, "m/s"}};
    twin.ingest(rec);
  }
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Twin, CsvExportHeaderAndRows) {
  DigitalTwin twin(default_topology());
  twin.flush(initial_state(default_topology()));
  std::ostringstream os;
  twin.export_history_csv(os);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("time_s,node_id,property,value,unit\n", 0), 0u);
  EXPECT_NE(s.find("0,water_tank,level,25000,kg\n"), std::string::npos);
}

TEST(WhatIf, PureAndMatchesDirectStepping) {
  const auto topo = default_topology();
  Snapshot snap;
  snap.state = running(topo, {50, 30000, 3000});
  const auto before = state_hash(snap.state);
  WhatIfRequest req;
  req.setpoints_kw = {{60, 35000, 3500}, {40, 20000, 2000}};
  req.setpoint_step_s = 300;
  req.duration_s = 600;
  req.dt_s = 10;
  req.wind_mps = {11.5};
  req.through_control = false;
  req.record_states = true;
  const auto r = what_if(topo, snap, req);
  EXPECT_EQ(state_hash(snap.state), before);
  ASSERT_EQ(r.time_s.size(), 60u);
  // Same trajectory by hand.
  PlantState s = snap.state;
  for (int i = 0; i < 60; ++i) {
    s = step_plant(topo, s, req.setpoints_kw[i < 30 ? 0 : 1], {}, 11.5, 10).state;
    ASSERT_EQ(s, r.states[i]) << i;
  }
  EXPECT_EQ(r.final_state, s);
}

TEST(WhatIf, ThroughControlNeverOverloads) {
  const auto topo = default_topology();
  Snapshot snap;
  snap.state = running(topo, {50, 30000, 3000});
  WhatIfRequest req;
  req.setpoints_kw = {{100, 50000, 5000}};
  req.duration_s = 3600;
  req.wind_mps = {7.0};  // far less than the plan
  EXPECT_NO_THROW(what_if(topo, snap, req));
}

TEST(WhatIf, RejectsBadSetpoints) {
  const auto topo = default_topology();
  Snapshot snap;
  snap.state = initial_state(topo);
  WhatIfRequest req;
  req.duration_s = 100;
  req.wind_mps = {10};
  req.setpoints_kw = {{-1, 0, 0}};
  EXPECT_THROW(what_if(topo, snap, req), InvalidSetpoint);
  req.setpoints_kw = {{0, 1e9, 0}};
  EXPECT_THROW(what_if(topo, snap, req), InvalidSetpoint);
  req.setpoints_kw = {{0, 0}};
  EXPECT_THROW(what_if(topo, snap, req), InvalidSetpoint);
  req.setpoints_kw = {{0, std::nan(""), 0}};
  EXPECT_THROW(what_if(topo, snap, req), InvalidSetpoint);
  req.setpoints_kw = {};
  EXPECT_THROW(what_if(topo, snap, req), InvalidSetpoint);
}

TEST(WhatIf, RawSetpointsAbovePowerAreRejected) {
  const auto topo = default_topology();
  Snapshot snap;
  snap.state = running(topo, {50, 30000, 3000});
  const auto before = state_hash(snap.state);
  WhatIfRequest req;
  req.setpoints_kw = {{100, 50000, 5000}};
  req.duration_s = 600;
  req.wind_mps = {5.0};
  req.through_control = false;
  EXPECT_THROW(what_if(topo, snap, req), InvalidSetpoint);
  EXPECT_EQ(state_hash(snap.state), before);
}

TEST(WhatIf, ReplayOfARecordedRunIsBitExact) {
  Scenario sc;
  sc.duration_s = 6 * 3600;
  sc.seed = 3;
  const auto rep = run_headless(sc, RunOptions{true, true, false, false});
  Snapshot snap;
  snap.state = rep.initial_state;
  WhatIfRequest req;
  req.dt_s = sc.dt_sim_s;
  req.setpoint_step_s = sc.dt_sim_s;
  req.duration_s = rep.replay.size() * sc.dt_sim_s;
  req.through_control = false;
  req.record_states = true;
  for (const auto& t : rep.replay) {
    req.setpoints_kw.push_back(t.commands_kw);
    req.wind_mps.push_back(t.wind_mps);
    req.ship_orders.push_back(t.order);
  }
  const auto r = what_if(sc.topology, snap, req);
  ASSERT_EQ(r.states.size(), rep.states.size());
  for (std::size_t i = 0; i < r.states.size(); ++i) ASSERT_EQ(r.states[i], rep.states[i]) << i;
}

TEST(ForecastPerTick, FallsBackToCurrentWind) {
  Snapshot snap;
  snap.state.wind_mps = 8;
  const auto w = forecast_wind_per_tick(snap, 100, 10);
  ASSERT_EQ(w.size(), 10u);
  for (double v : w) EXPECT_EQ(v, 8);
}
