#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "ptx/error.hpp"
#include "ptx/scheduler.hpp"

using namespace ptx;

namespace {

ScheduleProblem simple(std::size_t T, double forecast) {
  ScheduleProblem p;
  p.topology = default_topology();
  p.horizon_steps = T;
  p.power_forecast_kw.assign(T, forecast);
  for (const auto& st : p.topology.storages) p.initial_levels.push_back(st.initial_level);
  p.initial_loads_kw.assign(p.topology.modules.size(), 0.0);
  return p;
}

}  // namespace

TEST(BuildLp, SmallestInstanceHasTwoVariablesAndOneRow) {
  ScheduleProblem p;
  p.topology.modules = {default_module(ModuleKind::Synthesis)};
  p.topology.modules[0].feeds.clear();
  p.topology.storages = {{"methanol_tank", Species::Methanol, 1e6, 0, 0}};
  p.horizon_steps = 1;
  p.power_forecast_kw = {1000};
  p.initial_levels = {0};
  p.initial_loads_kw = {0};
  LpLayout L;
  const auto lp = build_lp(p, &L);
  // load, curtail, one storage level; power balance, storage balance and
  // ramp rows (the 50 kW/min ramp binds over 15 min).
  EXPECT_EQ(lp.num_vars(), 3u);
  EXPECT_EQ(L.load[0][0], 0u);
  EXPECT_EQ(L.curtail[0], 1u);
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.setpoints_kw[0][0], 750, 1e-9);  // 50 kW/min * 15 min from 0
}

TEST(Schedule, ZeroForecastGivesZeroLoads) {
  auto p = simple(8, 0.0);
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  for (const auto& m : s.setpoints_kw) {
    for (double v : m) EXPECT_NEAR(v, 0.0, 1e-9);
  }
  // Objective is just the terminal-weight term on the untouched levels.
  const auto w = terminal_weights(p);
  double term = 0;
  for (std::size_t k = 0; k < w.size(); ++k) term += w[k] * p.initial_levels[k];
  EXPECT_NEAR(s.objective, term, 1e-9 * (1 + term));
}

TEST(Schedule, RespectsPinsAndMaintenance) {
  auto p = simple(12, 50000.0);
  p.initial_loads_kw = {50, 30000, 3000};
  p.pins.push_back({1, 0, 12, 25000.0});
  p.maintenance.push_back({2, 4, 8});
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  for (std::size_t t = 0; t < 12; ++t) {
    EXPECT_EQ(s.setpoints_kw[1][t], 25000.0);
    if (t >= 4 && t < 8) EXPECT_EQ(s.setpoints_kw[2][t], 0.0);
  }
  EXPECT_EQ(s.pinned_modules, (std::vector<std::size_t>{1}));
  EXPECT_TRUE(check_schedule(p, s).empty());
}

TEST(Schedule, PinAboveForecastUsesShortfall) {
  auto p = simple(4, 10000.0);
  p.initial_loads_kw = {0, 30000, 0};
  p.pins.push_back({1, 0, 4, 30000.0});
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(s.setpoints_kw[1][t], 30000.0);
    EXPECT_NEAR(s.shortfall_kw[t], 20000.0 + s.setpoints_kw[0][t] + s.setpoints_kw[2][t], 1e-6);
  }
}

TEST(Schedule, ShipWindowDrainsMethanol) {
  auto p = simple(8, 0.0);
  p.initial_levels[3] = 1000;
  ShipWindow w;
  w.first_step = 2;
  w.end_step = 4;
  w.offtake_capacity[idx(Species::Methanol)] = 600;
  p.ships.push_back(w);
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  const auto& off = s.offtake_kg[idx(Species::Methanol)];
  EXPECT_NEAR(off[2] + off[3], 600, 1e-6);  // offtake tie-break uses the whole window
  EXPECT_EQ(off[0], 0.0);
  EXPECT_NEAR(s.storage_kg[3][7], 400, 1e-6);
}

TEST(Schedule, InfeasibleWhenPinnedConsumerHasNoFeed) {
  auto p = simple(4, 60000.0);
  p.initial_levels[1] = 0;  // no hydrogen
  p.topology.storages[1].initial_level = 0;
  p.initial_loads_kw = {0, 0, 5000};
  p.pins.push_back({2, 0, 4, 5000.0});
  p.maintenance.push_back({1, 0, 4});
  EXPECT_EQ(schedule(p).status, LpStatus::Infeasible);
}

TEST(Schedule, ValidationErrors) {
  auto p = simple(4, 1000);
  p.power_forecast_kw.pop_back();
  EXPECT_THROW(build_lp(p), ValidationError);
  p = simple(4, 1000);
  p.pins.push_back({0, 0, 4, 1e9});
  EXPECT_THROW(build_lp(p), ValidationError);
  p = simple(4, 1000);
  ShipWindow a, b;
  a.first_step = 0; a.end_step = 2;
  b.first_step = 1; b.end_step = 3;
  p.ships = {a, b};
  EXPECT_THROW(build_lp(p), ValidationError);
  p = simple(4, -1);
  EXPECT_THROW(build_lp(p), ValidationError);
}

TEST(CheckSchedule, DetectsCorruptedSchedules) {
  auto p = simple(8, 40000.0);
  p.initial_loads_kw = {50, 30000, 3000};
  const auto good = schedule(p);
  ASSERT_EQ(good.status, LpStatus::Optimal);
  ASSERT_TRUE(check_schedule(p, good).empty());

  auto bad = good;
  bad.setpoints_kw[1][3] += 10000;  // breaks ramp and power balance
  EXPECT_FALSE(check_schedule(p, bad).empty());
  bad = good;
  bad.curtail_kw[0] += 1;
  EXPECT_FALSE(check_schedule(p, bad).empty());
  bad = good;
  bad.storage_kg[1][5] += 1;
  EXPECT_FALSE(check_schedule(p, bad).empty());
  bad = good;
  bad.offtake_kg[idx(Species::Methanol)][0] = 5;  // no ship window
  EXPECT_FALSE(check_schedule(p, bad).empty());
}

TEST(CheckSchedule, PassesOnRandomCorpus) {
  int optimal = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto p = oracle::random_schedule_problem(seed);
    Schedule s;
    ASSERT_NO_THROW(s = schedule(p)) << seed;
    if (s.status != LpStatus::Optimal) continue;
    ++optimal;
    const auto v = check_schedule(p, s);
    EXPECT_TRUE(v.empty()) << seed << ": " << (v.empty() ? "" : v.front());
  }
  EXPECT_GT(optimal, 40);
}

TEST(Schedule, ObjectiveEqualsMethanolPlusPenalties) {
  const auto p = oracle::random_schedule_problem(21);
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  const double h = p.step_s / 3600.0;
  double obj = s.methanol_kg;
  for (std::size_t t = 0; t < p.horizon_steps; ++t) {
    obj -= p.weights.lambda_curtail * h * s.curtail_kw[t];
    obj -= p.weights.lambda_shortfall * h * s.shortfall_kw[t];
    for (std::size_t sp = 0; sp < kSpeciesCount; ++sp) obj += p.weights.lambda_offtake * s.offtake_kg[sp][t];
  }
  const auto w = terminal_weights(p);
  for (std::size_t k = 0; k < w.size(); ++k) obj += w[k] * s.storage_kg[k][p.horizon_steps - 1];
  EXPECT_NEAR(obj, s.objective, 1e-6 * (1 + std::abs(obj)));
}

TEST(BruteForce, TinyInstancesWithinDiscretizationBound) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = oracle::tiny_schedule_problem(seed);
    const auto s = schedule(p);
    const auto g = oracle::grid_search(p);
    ASSERT_TRUE(g.feasible) << seed;  // all-zero loads are on the grid
    ASSERT_EQ(s.status, LpStatus::Optimal) << seed;
    EXPECT_GE(s.objective, g.objective - 1e-9) << seed;
    EXPECT_LE(s.objective, g.objective + oracle::discretization_bound(p) + 1e-9) << seed;
    // The LP plan evaluated independently gives the same objective.
    EXPECT_NEAR(oracle::tiny_objective(p, s.setpoints_kw), s.objective, 1e-9) << seed;
  }
}

TEST(Monotonicity, ProductionNonDecreasingUnderDoubledForecast) {
  // Methanol production is the primary term; the curtailment penalty can
  // legitimately shave a tiny amount off the full objective.
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto p = oracle::random_schedule_problem(seed);
    const auto a = schedule(p);
    if (a.status != LpStatus::Optimal) continue;
    for (double& f : p.power_forecast_kw) f *= 2;
    const auto b = schedule(p);
    ASSERT_EQ(b.status, LpStatus::Optimal) << seed;
    EXPECT_GE(b.methanol_kg, a.methanol_kg - 1e-6 * (1 + a.methanol_kg)) << seed;
  }
}

TEST(Monotonicity, ObjectiveNonDecreasingWithoutCurtailmentPenalty) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto p = oracle::random_schedule_problem(seed);
    p.weights.lambda_curtail = 0;
    const auto a = schedule(p);
    if (a.status != LpStatus::Optimal) continue;
    for (double& f : p.power_forecast_kw) f *= 2;
    const auto b = schedule(p);
    ASSERT_EQ(b.status, LpStatus::Optimal) << seed;
    EXPECT_GE(b.objective, a.objective - 1e-7 * (1 + std::abs(a.objective))) << seed;
  }
}

TEST(RecedingStep, Triggers) {
  ReschedulePolicy pol{3600};
  EXPECT_TRUE(receding_step(0, std::nullopt, pol, {}));
  EXPECT_FALSE(receding_step(3599, 0.0, pol, {}));
  EXPECT_TRUE(receding_step(3600, 0.0, pol, {}));
  // Accumulated clock error just below the interval still counts.
  EXPECT_TRUE(receding_step(3600 - 1e-9, 0.0, pol, {}));
  EXPECT_TRUE(receding_step(10, 0.0, pol, {true, false, false}));
  EXPECT_TRUE(receding_step(10, 0.0, pol, {false, true, false}));
  EXPECT_TRUE(receding_step(10, 0.0, pol, {false, false, true}));
}

TEST(Schedule, RampDownRelaxationIsReported) {
  auto p = simple(4, 0.0);
  p.initial_loads_kw = {0, 0, 5000};
  // synthesis can only shed 750 kW per step with no power available
  EXPECT_EQ(schedule(p).status, LpStatus::Infeasible);
  p.ramp_down_rows = false;
  const auto s = schedule(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_TRUE(s.ramp_down_relaxed);
}
