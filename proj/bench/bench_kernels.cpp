#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ptx/harness.hpp"
#include "ptx/kernels.hpp"
#include "ptx/lp.hpp"
#include "ptx/scheduler.hpp"

using namespace ptx;
namespace k = ptx::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

k::Backend backend_arg(const benchmark::State& st) {
  return st.range(1) ? k::Backend::OpenMP : k::Backend::Serial;
}

void BM_Pivot(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const std::size_t rows = n, cols = 2 * n;
  const auto base = random_vec(rows * cols, -1, 1, 1);
  const auto obj0 = random_vec(cols, -1, 1, 2);
  std::vector<std::size_t> scratch;
  for (auto _ : st) {
    st.PauseTiming();
    auto t = base;
    auto obj = obj0;
    st.ResumeTiming();
    k::pivot(backend_arg(st), t, rows, cols, n / 2, n / 3, obj, scratch);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_Pivot)->ArgsProduct({{200, 800}, {0, 1}});

void BM_PowerMatrix(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto wind = random_vec(n, 0, 30, 3);
  std::vector<double> p(n);
  const TurbineParams t;
  for (auto _ : st) {
    k::power_matrix(backend_arg(st), wind, p, t);
    benchmark::DoNotOptimize(p.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_PowerMatrix)->ArgsProduct({{96 * 200, 96 * 2000}, {0, 1}});

void BM_ColumnQuantiles(benchmark::State& st) {
  const std::size_t rows = static_cast<std::size_t>(st.range(0)), cols = 96;
  const auto v = random_vec(rows * cols, 0, 60000, 4);
  const std::vector<double> levels{0.1, 0.5, 0.9};
  std::vector<double> out(levels.size() * cols);
  for (auto _ : st) {
    k::column_quantiles(backend_arg(st), v, rows, cols, levels, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ColumnQuantiles)->ArgsProduct({{200, 2000}, {0, 1}});

void BM_Ar1Scenarios(benchmark::State& st) {
  const std::size_t scen = static_cast<std::size_t>(st.range(0)), steps = 96;
  const std::vector<double> mean(steps, 9.0);
  std::vector<double> out(scen * steps);
  for (auto _ : st) {
    k::ar1_scenarios(backend_arg(st), mean, 2.0, 0.95, scen, 7, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Ar1Scenarios)->ArgsProduct({{200, 2000}, {0, 1}});

void BM_ScheduleSolve(benchmark::State& st) {
  ScheduleProblem p;
  p.topology = default_topology();
  p.horizon_steps = static_cast<std::size_t>(st.range(0));
  for (std::size_t t = 0; t < p.horizon_steps; ++t) p.power_forecast_kw.push_back(20000 + 300.0 * (t % 40));
  for (const auto& s : p.topology.storages) p.initial_levels.push_back(s.initial_level);
  p.initial_loads_kw.assign(p.topology.modules.size(), 0.0);
  for (auto _ : st) benchmark::DoNotOptimize(schedule(p).objective);
}
BENCHMARK(BM_ScheduleSolve)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_HeadlessDay(benchmark::State& st) {
  Scenario sc;
  sc.duration_s = 86400;
  for (auto _ : st) benchmark::DoNotOptimize(run_headless(sc).totals.methanol_produced_kg);
}
BENCHMARK(BM_HeadlessDay)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
