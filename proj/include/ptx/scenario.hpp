#pragma once

// Scenario configuration: one JSON file describing the plant, its control,
// forecast and scheduling parameters, the wind source and the logistics and
// maintenance calendars. Every omitted field takes a documented default and
// the fully-defaulted scenario can be echoed back.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ptx/control.hpp"
#include "ptx/forecast.hpp"
#include "ptx/plant.hpp"
#include "ptx/scheduler.hpp"

namespace ptx {

enum class WindSourceKind : std::uint8_t { Synthetic, Trace, Constant };

// AR(1) wind generator on a coarse grid, linearly interpolated in between.
struct WindGeneratorParams {
  double mu = 10.0;
  double sigma_inf = 3.5;
  double rho = 0.97;      // per step
  double step_s = 900.0;
  std::optional<double> v0;  // start value; default mu
};

struct WindTracePoint {
  double time_s = 0.0;
  double wind_mps = 0.0;
};

struct WindSourceConfig {
  WindSourceKind kind = WindSourceKind::Synthetic;
  WindGeneratorParams generator;
  std::string trace_path;
  std::vector<WindTracePoint> trace;  // loaded from trace_path
  double constant_mps = 0.0;
};

// A ship call. Offtake/delivery capacity per species over the whole call
// (kInf = unbounded, 0 = none).
struct ShipCall {
  double arrival_s = 0.0;
  double duration_s = 0.0;
  PerSpecies<double> offtake_kg{};
  PerSpecies<double> delivery_kg{};
};

struct MaintenanceItem {
  std::string module;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct InitialModuleState {
  std::string module;
  ModuleMode mode = ModuleMode::Off;
  double load_kw = 0.0;
};

struct ForecastConfig {
  // Explicit climatology; when absent the synthetic generator's parameters are
  // used, or (trace / constant wind) a fit on the realized history.
  std::optional<ClimatologyParams> climatology;
  std::size_t n_scenarios = 32;
  std::vector<double> quantile_levels = kDefaultQuantileLevels;
  double scheduler_quantile = 0.5;
};

struct SchedulerConfig {
  double step_s = 900.0;
  std::size_t horizon_steps = 96;
  ObjectiveWeights weights;
  int deviation_ticks = 3;             // sustained deviation window, control ticks
  double deviation_refractory_s = 900;  // minimum spacing of deviation-triggered solves
};

struct TeleopConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  double speed = 1.0;  // sim seconds per wall second; <= 0 runs unpaced
};

struct Scenario {
  std::string name = "unnamed";
  std::uint64_t seed = 1;
  double duration_s = 7 * 86400.0;
  double dt_sim_s = 10.0;
  double resched_interval_s = 3600.0;
  std::string preset;  // "", "low-wind" or "high-dynamics"
  PlantTopology topology = default_topology();
  std::vector<InitialModuleState> initial_modules;
  ControlConfig control = default_control_config(default_topology());
  ForecastConfig forecast;
  SchedulerConfig scheduler;
  WindSourceConfig wind;
  std::vector<ShipCall> ships;
  std::vector<MaintenanceItem> maintenance;
  std::optional<double> production_goal_kg;  // planning level: reported against only
  TeleopConfig teleop;
};

// Throws ValidationError naming the violated invariant.
void validate(const Scenario& s);

// Ship calendar default: a call every 72 h starting at 72 h, 4 h long, taking
// any amount of methanol and refilling the CO2 buffer.
std::vector<ShipCall> periodic_ships(const PlantTopology& topo, double first_s, double period_s,
                                     double duration_s, double horizon_end_s);

// Named presets; throws ValidationError for unknown names.
//   low-wind:      generator mu x 0.4
//   high-dynamics: generator rho = 0.8, sigma_inf x 2
void apply_preset(Scenario& s, const std::string& preset);
WindGeneratorParams preset_generator(const WindGeneratorParams& base, const std::string& preset);

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);
// Full echo with every default made explicit.
nlohmann::json scenario_to_json(const Scenario& s);

// CSV with header time_s,wind_mps; times strictly increasing.
std::vector<WindTracePoint> load_wind_trace_csv(const std::string& path);
std::vector<WindTracePoint> parse_wind_trace_csv(const std::string& text, const std::string& where);

// Deterministic wind sample source for the run loop.
class WindGenerator {
 public:
  WindGenerator() = default;
  // Synthetic generator starting at time t0 from v_start (or the params' v0/mu).
  WindGenerator(const WindGeneratorParams& p, std::uint64_t seed, double t0 = 0.0,
                std::optional<double> v_start = std::nullopt);
  static WindGenerator constant(double v);
  static WindGenerator from_trace(std::vector<WindTracePoint> trace);

  // Wind speed at absolute time t (non-decreasing t for the synthetic kind).
  double at(double t_s);

 private:
  WindSourceKind kind_ = WindSourceKind::Constant;
  WindGeneratorParams p_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double t0_ = 0.0;
  std::vector<double> knots_;  // untruncated AR(1) values at t0 + k * step
  double constant_ = 0.0;
  std::vector<WindTracePoint> trace_;
};

WindGenerator make_wind_generator(const Scenario& s);

// A scenario drawn from the documented ranges used by the property suites:
//   turbines 1..6 x 15 MW, module p_max x [0.5, 1.5], storage capacities x
//   [0.5, 2], initial levels uniform in [min, capacity], wind mu in [4, 14],
//   sigma in [1, 5], rho in [0.8, 0.99], ship period 12..72 h.
Scenario random_scenario(std::uint64_t seed, double duration_s);

}  // namespace ptx
