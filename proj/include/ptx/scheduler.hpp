#pragma once

// Optimal process scheduling over a receding horizon: builds a linear program
// from the plant snapshot, power forecast, logistics and maintenance plans and
// solves it with the in-repo simplex.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ptx/lp.hpp"
#include "ptx/plant.hpp"

namespace ptx {

// Ship call over steps [first_step, end_step). Capacities are per species,
// 0 = no transfer of that species. kInf is allowed.
struct ShipWindow {
  std::size_t first_step = 0;
  std::size_t end_step = 0;
  PerSpecies<double> offtake_capacity{};
  PerSpecies<double> delivery_capacity{};
};

struct MaintenanceWindow {
  std::size_t module = 0;
  std::size_t first_step = 0;
  std::size_t end_step = 0;
};

struct Pin {
  std::size_t module = 0;
  std::size_t first_step = 0;
  std::size_t end_step = 0;
  double load_kw = 0.0;
};

struct ObjectiveWeights {
  double lambda_curtail = 1e-6;  // per kWh curtailed
  // per kg left in storage at the end of the horizon, per storage (empty =
  // 1e-3 for every storage except the methanol product, which gets 0)
  std::vector<double> lambda_terminal;
  double lambda_offtake = 1e-6;    // per kg shipped (tie-break toward using ship calls)
  double lambda_shortfall = 1e3;  // per kWh of pinned load the forecast cannot cover
};

struct ScheduleProblem {
  PlantTopology topology;
  std::size_t horizon_steps = 96;
  double step_s = 900.0;
  double issued_at_s = 0.0;
  double forecast_issued_at_s = 0.0;
  std::vector<double> power_forecast_kw;  // horizon_steps
  std::vector<double> initial_levels;     // per storage
  std::vector<double> initial_loads_kw;   // per module
  std::vector<ShipWindow> ships;
  std::vector<MaintenanceWindow> maintenance;
  std::vector<Pin> pins;
  ObjectiveWeights weights;
  bool ramp_down_rows = true;  // cleared on the retry after an infeasible solve
};

// Throws ValidationError.
void validate(const ScheduleProblem& p);

struct Schedule {
  double issued_at_s = 0.0;
  double forecast_issued_at_s = 0.0;
  double step_s = 900.0;
  std::size_t horizon_steps = 0;
  LpStatus status = LpStatus::Infeasible;
  std::vector<std::vector<double>> setpoints_kw;  // [module][step]
  std::vector<std::vector<double>> storage_kg;    // [storage][step], level at the end of the step
  std::vector<double> curtail_kw;                 // [step]
  std::vector<double> shortfall_kw;               // [step]
  std::vector<double> forecast_kw;                // [step], the power the schedule assumed
  PerSpecies<std::vector<double>> offtake_kg;     // [species][step]
  PerSpecies<std::vector<double>> delivery_kg;
  double objective = 0.0;
  double methanol_kg = 0.0;
  std::vector<std::size_t> pinned_modules;
  bool ramp_down_relaxed = false;
  std::size_t lp_iterations = 0;
};

// Index bookkeeping between the problem and its LP.
struct LpLayout {
  std::vector<std::vector<std::size_t>> load;     // [module][step]
  std::vector<std::size_t> curtail;               // [step]
  std::vector<std::optional<std::size_t>> shortfall;  // [step]
  std::vector<std::vector<std::size_t>> level;    // [scheduled storage][step]
  std::vector<std::size_t> scheduled_storages;    // topology index of each storage in `level`
  // (step, storage index) -> variable, only inside ship windows
  std::vector<PerSpecies<std::optional<std::size_t>>> offtake;
  std::vector<PerSpecies<std::optional<std::size_t>>> delivery;
};

// Per-step terminal weights after defaulting.
std::vector<double> terminal_weights(const ScheduleProblem& p);

// Whether a ramp constraint for module m between steps t-1 and t is encoded
// (t = 0 is the anchor to the current load).
bool ramp_row_active(const ScheduleProblem& p, std::size_t m, std::size_t t);

LinearProgram build_lp(const ScheduleProblem& p, LpLayout* layout = nullptr);

// Re-evaluates every constraint of the problem directly against the schedule.
// Returns a list of human-readable violations (empty when feasible).
std::vector<std::string> check_schedule(const ScheduleProblem& p, const Schedule& s,
                                        double tol = 1e-6);

// build_lp -> solve_lp -> unpack -> check_schedule. Throws
// FeasibilityCheckFailed if an Optimal schedule does not pass the check.
Schedule schedule(const ScheduleProblem& p, const LpOptions& opts = {});

struct ReschedulePolicy {
  double interval_s = 3600.0;
};

struct RescheduleTriggers {
  bool override_changed = false;
  bool ship_arrival = false;
  bool power_deviation = false;
};

// True when a new schedule is due: none issued yet, the interval elapsed, or a
// trigger fired.
bool receding_step(double now_s, std::optional<double> last_issued_s,
                   const ReschedulePolicy& policy, const RescheduleTriggers& triggers);

}  // namespace ptx
