#pragma once

// The nested-timescale run loop: per dt_sim tick sample wind, drain operator
// commands, reschedule when due, run the control layer, step the plant and
// flush telemetry to the twin. Also the tick-boundary command queue, the event
// bus and the simulation clock shared with the teleoperation service.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ptx/control.hpp"
#include "ptx/forecast.hpp"
#include "ptx/plant.hpp"
#include "ptx/scenario.hpp"
#include "ptx/scheduler.hpp"
#include "ptx/twin.hpp"

namespace ptx {

// --- operator commands ------------------------------------------------------

struct OverrideCommand {
  std::size_t module = 0;
  std::optional<double> target_kw;  // nullopt = release
  std::string operator_id;
  std::string reason;
};

struct ScenarioCommand {
  std::string preset;                 // "low-wind" / "high-dynamics"
  std::vector<WindTracePoint> trace;  // times relative to the moment of application
  std::optional<double> ship_now_s;   // schedule an immediate ship call of this length
};

struct Command {
  std::uint64_t id = 0;
  std::variant<OverrideCommand, ScenarioCommand> body;
};

// Serialized hand-over from request handlers to the simulation loop. Holds the
// single-operator-per-module registry so conflicts are refused at submit time.
class CommandQueue {
 public:
  // Returns the assigned id, or nullopt when another operator holds the module.
  std::optional<std::uint64_t> submit_override(OverrideCommand cmd);
  std::uint64_t submit_scenario(ScenarioCommand cmd);
  std::vector<Command> drain();  // loop thread, tick boundary only
  bool empty() const;
  bool swap_pending() const { return swaps_pending_.load() > 0; }
  void swap_applied() { --swaps_pending_; }
  std::optional<std::string> holder(std::size_t module) const;

 private:
  mutable std::mutex mu_;
  std::deque<Command> q_;
  std::map<std::size_t, std::string> holders_;
  std::uint64_t next_id_ = 1;
  std::atomic<int> swaps_pending_{0};
};

// --- event stream -----------------------------------------------------------

struct Event {
  std::uint64_t seq = 0;
  std::string type;  // frame | alarm | ack | schedule | scenario
  std::string data;  // JSON text
};

// Bounded ring of recent events; readers poll with a cursor.
class EventBus {
 public:
  explicit EventBus(std::size_t capacity = 8192) : cap_(capacity) {}
  void publish(std::string type, std::string data);
  // Events with seq > after, waiting up to wait_ms for one to arrive.
  std::vector<Event> since(std::uint64_t after, int wait_ms);
  std::uint64_t last_seq() const;
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Event> ring_;
  std::size_t cap_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
};

class SimClock {
 public:
  void pause() { paused_ = true; }
  void resume() { paused_ = false; }
  bool paused() const { return paused_; }
  void set_speed(double s) { speed_ = s; }
  double speed() const { return speed_; }

 private:
  std::atomic<bool> paused_{false};
  std::atomic<double> speed_{1.0};
};

// --- run report -----------------------------------------------------------------

struct TickRow {
  double time_s = 0.0;  // end of the tick
  double wind_mps = 0.0;
  double available_kw = 0.0;
  double used_kw = 0.0;
  double curtailed_kw = 0.0;
  std::vector<double> load_kw;      // per module
  std::vector<double> command_kw;   // per module
  std::vector<double> level;        // per storage, end of tick
  double methanol_kg = 0.0;         // produced this tick
  FlowSet flows;
};

struct FlowTotals {
  double energy_available_kwh = 0.0;
  double energy_used_kwh = 0.0;
  double energy_curtailed_kwh = 0.0;
  double methanol_produced_kg = 0.0;
  PerSpecies<double> produced{};
  PerSpecies<double> consumed{};
  PerSpecies<double> offtake{};
  PerSpecies<double> delivered{};
  PerSpecies<double> vented{};

  void add(const TickRow& r, double dt_s);
};

struct IntervalRow {
  double start_s = 0.0;
  double end_s = 0.0;
  FlowTotals totals;
};

struct ScheduleLogEntry {
  std::string reason;
  std::shared_ptr<const Schedule> schedule;
};

struct TickRecord {
  double time_s = 0.0;  // start of the tick
  double wind_mps = 0.0;
  std::vector<double> commands_kw;
  ShipOrder order;
};

struct RunReport {
  Scenario scenario;
  std::vector<TickRow> ticks;
  std::vector<IntervalRow> intervals;
  std::vector<Alarm> alarms;
  std::vector<ScheduleLogEntry> schedules;
  FlowTotals totals;
  PlantState initial_state;
  PlantState final_state;
  std::vector<TickRecord> replay;   // with RunOptions::record_replay
  std::vector<PlantState> states;   // state after each tick, with record_states
  std::size_t telemetry_rejected = 0;
  double wall_clock_s = 0.0;        // never written into report.json
};

struct RunOptions {
  bool record_replay = false;
  bool record_states = false;
  bool publish_snapshots = false;  // every tick; needed when serving
  bool publish_events = false;
};

// Initial plant state including any scenario-specified module states.
PlantState scenario_initial_state(const Scenario& s);

class Simulation {
 public:
  explicit Simulation(Scenario s, RunOptions opts = {});

  bool done() const { return tick_ >= total_ticks_; }
  std::size_t tick_index() const { return tick_; }
  std::size_t total_ticks() const { return total_ticks_; }
  void step();
  // Finalises totals and hands the report over (call once, after the run).
  RunReport take_report();

  const Scenario& scenario() const { return sc_; }
  const PlantTopology& topology() const { return sc_.topology; }
  const PlantState& state() const { return state_; }  // loop thread only
  const ControlLayer& control() const { return control_; }
  std::shared_ptr<const Schedule> active_schedule() const { return schedule_; }
  DigitalTwin& twin() { return *twin_; }
  const DigitalTwin& twin() const { return *twin_; }
  CommandQueue& queue() { return queue_; }
  EventBus& events() { return events_; }
  SimClock& clock() { return clock_; }
  void publish_snapshot();

 private:
  void apply_commands(double now);
  void reschedule(double now, double v, const std::string& reason);
  ClimatologyParams climatology() const;
  std::optional<std::size_t> active_ship(double t) const;
  void raise(const Alarm& a);

  Scenario sc_;
  RunOptions opts_;
  std::size_t total_ticks_ = 0;
  std::size_t tick_ = 0;
  PlantState state_;
  ControlLayer control_;
  WindGenerator wind_;
  WindGeneratorParams wind_params_;
  bool wind_synthetic_ = true;
  std::unique_ptr<DigitalTwin> twin_;
  CommandQueue queue_;
  EventBus events_;
  SimClock clock_;

  std::shared_ptr<const Schedule> schedule_;
  std::shared_ptr<const ForecastEnsemble> wind_forecast_;
  std::shared_ptr<const PowerEnsemble> power_forecast_;
  std::optional<double> last_issued_;
  double last_deviation_solve_ = -1e300;
  std::size_t solve_count_ = 0;
  std::size_t swap_count_ = 0;
  bool pending_override_change_ = false;
  bool pending_scenario_change_ = false;
  std::optional<std::size_t> current_ship_;
  std::vector<PerSpecies<double>> ship_offtake_left_;
  std::vector<PerSpecies<double>> ship_delivery_left_;
  std::vector<double> step_history_;  // realized wind at scheduler-step boundaries
  std::map<std::string, Alarm> active_alarms_;  // code|node

  RunReport report_;
  IntervalRow interval_;
};

RunReport run_headless(const Scenario& s, const RunOptions& opts = {});

// Writes report.json, timeseries.csv, alarms.csv and schedules.json into dir
// (created if missing), plus runtime.json with the wall-clock figure. The first
// four are byte-identical for identical runs. Throws IoError.
void emit_report(const RunReport& r, const std::string& dir);

// Individual artifact bodies (used by emit_report and the tests).
std::string report_json_text(const RunReport& r);
std::string timeseries_csv_text(const RunReport& r);
std::string alarms_csv_text(const RunReport& r);
std::string schedules_json_text(const RunReport& r);

// CLI exit-code class of an exception: 1 validation/parse/bad setpoint, 2 runtime,
// 3 internal-bug class.
int exit_code_for(const std::exception& e);

}  // namespace ptx
