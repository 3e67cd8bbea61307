#pragma once

// Process control system: turns scheduler setpoints and operator overrides into
// power-feasible, interlock-safe per-tick commands and raises alarms.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptx/plant.hpp"

namespace ptx {

struct ControlConfig {
  std::vector<std::size_t> shed_priority;  // module indices, first entry is shed first
  std::vector<double> low_watermark;       // per storage, fraction of capacity
  std::vector<double> high_watermark;
  double staleness_horizon_s = 7200.0;
  double shortfall_band = 0.15;       // realized power below (1-band) * expected -> alarm
  double deviation_band = 0.15;       // |realized - expected| > band * expected -> deviation tick
  double deviation_floor_frac = 0.01;  // of farm rated power, guards expected ~ 0
  double alarm_clear_delay_s = 60.0;   // condition must stay absent this long before _CLEARED
};

// Defaults: shed synthesis, then electrolysis, then desalination (downstream
// first); watermarks 0.05 / 0.98.
ControlConfig default_control_config(const PlantTopology& topo);
void validate(const ControlConfig& cfg, const PlantTopology& topo);

enum class FrameSource : std::uint8_t { Scheduler, OperatorOverride };

struct SetpointFrame {
  double valid_from_s = 0.0;
  double issued_at_s = 0.0;  // when the producing schedule (or override) was issued
  std::vector<std::optional<double>> targets_kw;  // per module; nullopt = no opinion
  FrameSource source = FrameSource::Scheduler;
  std::string operator_id;
  double expected_power_kw = -1.0;  // forecast power the scheduler assumed; < 0 = unknown
};

enum class Severity : std::uint8_t { Info, Warning, Critical };
std::string_view to_string(Severity s);

struct Alarm {
  double time_s = 0.0;
  Severity severity = Severity::Info;
  std::string code;
  std::string message;
  std::string node;

  bool operator==(const Alarm&) const = default;
};

// Per-module target after frame selection.
struct ResolvedTargets {
  std::vector<double> target_kw;
  std::vector<bool> overridden;
};

// A condition observed during reconciliation; ControlLayer turns rising edges
// into alarms.
struct Condition {
  Severity severity;
  std::string code;
  std::string node;
  std::string message;
};

struct ReconcileResult {
  std::vector<double> commands_kw;
  std::vector<Condition> conditions;
};

// Ramp clamp -> interlocks -> priority shedding. Always returns commands with
// sum <= available_kw.
ReconcileResult reconcile(const ResolvedTargets& targets, const PlantTopology& topo,
                          const PlantState& state, double available_kw, const ControlConfig& cfg,
                          double dt_s);

// Commands that ramp every running module down to p_min, then stop it.
std::vector<double> safe_hold_targets(const PlantTopology& topo, const PlantState& state,
                                      double dt_s);

struct ControlTick {
  std::vector<double> commands_kw;
  std::vector<Alarm> alarms;
  bool safe_hold = false;
  double expected_power_kw = -1.0;
};

class ControlLayer {
 public:
  ControlLayer(PlantTopology topo, ControlConfig cfg);

  // Replaces every scheduler frame (a new schedule was swapped in).
  void set_scheduler_frames(std::vector<SetpointFrame> frames);
  void set_override(std::size_t module, double target_kw, std::string operator_id, double now_s);
  void release_override(std::size_t module);
  bool has_override(std::size_t module) const;
  std::optional<double> override_target(std::size_t module) const;
  std::map<std::size_t, double> active_overrides() const;
  const std::map<std::size_t, SetpointFrame>& override_frames() const { return overrides_; }

  ResolvedTargets resolve(double now_s, bool* stale, bool* none,
                          double* expected_power_kw) const;

  ControlTick tick(const PlantState& state, double v_mps, double dt_s);

  // Consecutive ticks whose realized power deviated beyond the band.
  int deviation_ticks() const { return deviation_ticks_; }
  void reset_deviation() { deviation_ticks_ = 0; }

  const ControlConfig& config() const { return cfg_; }
  const PlantTopology& topology() const { return topo_; }

 private:
  void emit_edges(const std::vector<Condition>& now, double t, std::vector<Alarm>& out);

  PlantTopology topo_;
  ControlConfig cfg_;
  std::vector<SetpointFrame> frames_;  // sorted by valid_from
  std::map<std::size_t, SetpointFrame> overrides_;
  std::map<std::string, Condition> active_;  // key: code|node
  std::map<std::string, double> last_seen_;  // same keys
  int deviation_ticks_ = 0;
};

}  // namespace ptx
