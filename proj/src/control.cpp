#include "ptx/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptx/error.hpp"

namespace ptx {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warning: return "warning";
    case Severity::Critical: return "critical";
  }
  return "?";
}

ControlConfig default_control_config(const PlantTopology& topo) {
  ControlConfig cfg;
  cfg.shed_priority.resize(topo.modules.size());
  std::iota(cfg.shed_priority.begin(), cfg.shed_priority.end(), std::size_t{0});
  // downstream first; stable keeps topology order within a kind
  std::stable_sort(cfg.shed_priority.begin(), cfg.shed_priority.end(),
                   [&](std::size_t a, std::size_t b) {
                     return static_cast<int>(topo.modules[a].kind) >
                            static_cast<int>(topo.modules[b].kind);
                   });
  cfg.low_watermark.assign(topo.storages.size(), 0.05);
  cfg.high_watermark.assign(topo.storages.size(), 0.98);
  return cfg;
}

void validate(const ControlConfig& cfg, const PlantTopology& topo) {
  std::vector<std::size_t> sorted = cfg.shed_priority;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> want(topo.modules.size());
  std::iota(want.begin(), want.end(), std::size_t{0});
  if (sorted != want) throw ValidationError("control.shed_priority must be a permutation of the modules");
  if (cfg.low_watermark.size() != topo.storages.size() ||
      cfg.high_watermark.size() != topo.storages.size()) {
    throw ValidationError("control watermarks: one entry per storage required");
  }
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    if (!(0.0 <= cfg.low_watermark[k] && cfg.low_watermark[k] < cfg.high_watermark[k] &&
          cfg.high_watermark[k] <= 1.0)) {
      throw ValidationError("control watermarks: 0 <= low < high <= 1 violated for '" +
                            topo.storages[k].name + "'");
    }
  }
  if (!(cfg.staleness_horizon_s > 0)) throw ValidationError("control.staleness_horizon_s > 0");
  if (!(cfg.alarm_clear_delay_s >= 0)) throw ValidationError("control.alarm_clear_delay_s >= 0");
}

namespace {

double clamp_to_band(const ConversionModuleParams& p, const ModuleState& s, double target,
                     double dt_s) {
  if (!(target > 0.0)) return 0.0;
  const LoadBand b = command_band(p, s, dt_s);
  return std::clamp(target, b.lo, b.hi);
}

double floor_of(const ConversionModuleParams& p, const ModuleState& s, double dt_s) {
  return command_band(p, s, dt_s).lo;
}

double sum(const std::vector<double>& v) {
  double t = 0.0;
  for (double x : v) t += x;
  return t;
}

}  // namespace

ReconcileResult reconcile(const ResolvedTargets& targets, const PlantTopology& topo,
                          const PlantState& state, double available_kw, const ControlConfig& cfg,
                          double dt_s) {
  const std::size_t n = topo.modules.size();
  if (targets.target_kw.size() != n) throw ContractViolation("reconcile: one target per module");
  ReconcileResult out;
  auto& cmd = out.commands_kw;
  cmd.assign(n, 0.0);
  available_kw = std::max(0.0, available_kw);

  const std::size_t ns = topo.storages.size();
  std::vector<bool> low(ns, false);
  std::vector<bool> high(ns, false);
  std::vector<bool> feeds_something(ns, false);
  std::vector<bool> receives_product(ns, false);
  for (const auto& p : topo.modules) {
    for (const auto& f : p.feeds) {
      if (auto k = topo.storage_of(f.species); k && f.kg_per_kg > 0.0) feeds_something[*k] = true;
    }
    if (auto k = topo.storage_of(p.product)) receives_product[*k] = true;
  }
  for (std::size_t k = 0; k < ns; ++k) {
    const auto& st = topo.storages[k];
    low[k] = feeds_something[k] && state.levels[k] < cfg.low_watermark[k] * st.capacity;
    high[k] = receives_product[k] && state.levels[k] > cfg.high_watermark[k] * st.capacity;
    if (low[k]) {
      out.conditions.push_back(
          {Severity::Warning, "LOW_WATERMARK", st.name, st.name + " below low watermark"});
    }
    if (high[k]) {
      out.conditions.push_back(
          {Severity::Warning, "HIGH_WATERMARK", st.name, st.name + " above high watermark"});
    }
  }

  for (std::size_t m = 0; m < n; ++m) {
    const auto& p = topo.modules[m];
    double t = std::clamp(targets.target_kw[m], 0.0, p.p_max_kw);
    // consumer interlock: any starved feed holds the module off
    for (const auto& f : p.feeds) {
      if (f.kg_per_kg <= 0.0) continue;
      const auto k = topo.storage_of(f.species);
      if (k && low[*k]) t = 0.0;
    }
    // producer interlock: full product storage derates toward minimum load
    if (const auto k = topo.storage_of(p.product); k && high[*k]) {
      t = std::min(t, p.p_min_kw());
      // stop cleanly rather than trip once even minimum load no longer fits
      const double kg_at_min = p.p_min_kw() * dt_s / 3600.0 / p.specific_energy_kwh_per_kg;
      if (state.levels[*k] + 2.0 * kg_at_min > topo.storages[*k].capacity) t = 0.0;
    }
    cmd[m] = clamp_to_band(p, state.modules[m], t, dt_s);
  }

  double total = sum(cmd);
  if (total <= available_kw) return out;

  std::vector<std::size_t> order;
  for (std::size_t m : cfg.shed_priority) {
    if (!targets.overridden[m]) order.push_back(m);
  }
  for (std::size_t m : cfg.shed_priority) {
    if (targets.overridden[m]) order.push_back(m);
  }

  const std::vector<double> pre = cmd;
  std::vector<bool> tripped(n, false);
  double deficit = total - available_kw;
  for (std::size_t m : order) {
    if (deficit <= 0.0) break;
    const double fl = floor_of(topo.modules[m], state.modules[m], dt_s);
    if (cmd[m] > fl) {
      const double cut = std::min(deficit, cmd[m] - fl);
      cmd[m] -= cut;
      deficit -= cut;
    }
  }
  for (std::size_t m : order) {
    if (deficit <= 0.0) break;
    if (cmd[m] > 0.0) {
      deficit -= cmd[m];
      cmd[m] = 0.0;
      tripped[m] = true;
      if (state.modules[m].mode == ModuleMode::Running) {
        out.conditions.push_back({Severity::Critical, "TRIP", topo.modules[m].name,
                                  topo.modules[m].name + " tripped: insufficient power"});
      }
    }
  }
  double surplus = available_kw - sum(cmd);
  for (auto it = order.rbegin(); it != order.rend() && surplus > 0.0; ++it) {
    const std::size_t m = *it;
    if (tripped[m] || cmd[m] >= pre[m]) continue;
    const double add = std::min(surplus, pre[m] - cmd[m]);
    cmd[m] += add;
    surplus -= add;
  }
  // Roundoff guard: the summed commands must not exceed the available power.
  for (int guard = 0; guard < 4 && sum(cmd) > available_kw; ++guard) {
    const double excess = sum(cmd) - available_kw;
    for (std::size_t m : order) {
      if (cmd[m] <= 0.0) continue;
      const double fl = floor_of(topo.modules[m], state.modules[m], dt_s);
      cmd[m] = cmd[m] - excess >= fl ? cmd[m] - excess : 0.0;
      break;
    }
  }

  out.conditions.push_back({Severity::Warning, "SHED", "platform",
                            "load shed to match available power"});
  for (std::size_t m = 0; m < n; ++m) {
    if (targets.overridden[m] && cmd[m] < pre[m]) {
      out.conditions.push_back({Severity::Warning, "OVERRIDE_SHED", topo.modules[m].name,
                                "operator override on " + topo.modules[m].name +
                                    " reduced by shedding"});
    }
  }
  return out;
}

std::vector<double> safe_hold_targets(const PlantTopology& topo, const PlantState& state,
                                      double dt_s) {
  std::vector<double> t(topo.modules.size(), 0.0);
  for (std::size_t m = 0; m < t.size(); ++m) {
    const auto& p = topo.modules[m];
    const auto& s = state.modules[m];
    if (s.mode != ModuleMode::Running) continue;
    const double pmin = p.p_min_kw();
    if (s.load_kw > pmin + 1e-9) t[m] = std::max(pmin, s.load_kw - p.ramp_per_step_kw(dt_s));
    if (t[m] <= 0.0) t[m] = 0.0;
  }
  return t;
}

ControlLayer::ControlLayer(PlantTopology topo, ControlConfig cfg)
    : topo_(std::move(topo)), cfg_(std::move(cfg)) {
  validate(cfg_, topo_);
}

void ControlLayer::set_scheduler_frames(std::vector<SetpointFrame> frames) {
  std::stable_sort(frames.begin(), frames.end(),
                   [](const SetpointFrame& a, const SetpointFrame& b) {
                     return a.valid_from_s < b.valid_from_s;
                   });
  frames_ = std::move(frames);
}

void ControlLayer::set_override(std::size_t module, double target_kw, std::string operator_id,
                                double now_s) {
  if (module >= topo_.modules.size()) throw ContractViolation("set_override: module index");
  SetpointFrame f;
  f.valid_from_s = now_s;
  f.issued_at_s = now_s;
  f.source = FrameSource::OperatorOverride;
  f.operator_id = std::move(operator_id);
  f.targets_kw.assign(topo_.modules.size(), std::nullopt);
  f.targets_kw[module] = std::clamp(target_kw, 0.0, topo_.modules[module].p_max_kw);
  overrides_[module] = std::move(f);
}

void ControlLayer::release_override(std::size_t module) { overrides_.erase(module); }

bool ControlLayer::has_override(std::size_t module) const { return overrides_.count(module) > 0; }

std::optional<double> ControlLayer::override_target(std::size_t module) const {
  auto it = overrides_.find(module);
  if (it == overrides_.end()) return std::nullopt;
  return it->second.targets_kw[module];
}

std::map<std::size_t, double> ControlLayer::active_overrides() const {
  std::map<std::size_t, double> out;
  for (const auto& [m, f] : overrides_) out[m] = *f.targets_kw[m];
  return out;
}

ResolvedTargets ControlLayer::resolve(double now_s, bool* stale, bool* none,
                                      double* expected_power_kw) const {
  const std::size_t n = topo_.modules.size();
  ResolvedTargets r;
  r.target_kw.assign(n, 0.0);
  r.overridden.assign(n, false);
  *stale = false;
  *none = true;
  *expected_power_kw = -1.0;

  auto it = std::upper_bound(frames_.begin(), frames_.end(), now_s,
                             [](double t, const SetpointFrame& f) { return t < f.valid_from_s; });
  const SetpointFrame* sched = it == frames_.begin() ? nullptr : &*std::prev(it);
  if (sched) {
    *none = false;
    *stale = now_s - sched->issued_at_s > cfg_.staleness_horizon_s;
    *expected_power_kw = sched->expected_power_kw;
    for (std::size_t m = 0; m < n; ++m) {
      if (sched->targets_kw[m]) r.target_kw[m] = *sched->targets_kw[m];
    }
  }
  for (const auto& [m, f] : overrides_) {
    r.target_kw[m] = *f.targets_kw[m];
    r.overridden[m] = true;
  }
  return r;
}

void ControlLayer::emit_edges(const std::vector<Condition>& now, double t,
                              std::vector<Alarm>& out) {
  for (const auto& c : now) {
    const std::string key = c.code + "|" + c.node;
    last_seen_[key] = t;
    if (active_.emplace(key, c).second) out.push_back({t, c.severity, c.code, c.message, c.node});
  }
  // off-delay: a condition clears only after staying absent for the delay
  for (auto it = active_.begin(); it != active_.end();) {
    const double seen = last_seen_[it->first];
    if (seen < t && t - seen >= cfg_.alarm_clear_delay_s) {
      const auto& c = it->second;
      out.push_back({t, Severity::Info, c.code + "_CLEARED", c.code + " cleared", c.node});
      last_seen_.erase(it->first);
      it = active_.erase(it);
    } else {
      ++it;
    }
  }
}

ControlTick ControlLayer::tick(const PlantState& state, double v_mps, double dt_s) {
  if (!(dt_s > 0.0)) throw ContractViolation("tick: dt must be > 0");
  const double now = state.sim_time_s;
  ControlTick out;
  bool stale = false;
  bool none = false;
  ResolvedTargets targets = resolve(now, &stale, &none, &out.expected_power_kw);
  std::vector<Condition> conds;
  if (none || stale) {
    out.safe_hold = true;
    const auto hold = safe_hold_targets(topo_, state, dt_s);
    for (std::size_t m = 0; m < hold.size(); ++m) {
      if (!targets.overridden[m]) targets.target_kw[m] = hold[m];
    }
    if (stale) {
      conds.push_back({Severity::Critical, "STALE_FRAME", "platform",
                       "newest scheduler frame is stale; safe-hold"});
    } else {
      conds.push_back({Severity::Info, "NO_SCHEDULE", "platform", "no scheduler frame; safe-hold"});
    }
  }

  const double available = deliverable_power(topo_, state, v_mps, dt_s);
  ReconcileResult r = reconcile(targets, topo_, state, available, cfg_, dt_s);
  conds.insert(conds.end(), r.conditions.begin(), r.conditions.end());

  const double wind_kw = power_curve(v_mps, topo_.turbine);
  const double expected = out.expected_power_kw;
  if (expected >= 0.0 && !out.safe_hold) {
    if (wind_kw < (1.0 - cfg_.shortfall_band) * expected) {
      conds.push_back({Severity::Info, "SHORTFALL", "platform",
                       "realized wind power below scheduled assumption"});
    }
    const double scale =
        std::max(expected, cfg_.deviation_floor_frac * topo_.turbine.farm_rated_kw());
    if (std::abs(wind_kw - expected) > cfg_.deviation_band * scale) {
      ++deviation_ticks_;
    } else {
      deviation_ticks_ = 0;
    }
  } else {
    deviation_ticks_ = 0;
  }

  emit_edges(conds, now, out.alarms);
  out.commands_kw = std::move(r.commands_kw);
  return out;
}

}  // namespace ptx
