#include "ptx/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ptx/error.hpp"
#include "ptx/json_io.hpp"
#include "ptx/kernels.hpp"

namespace ptx {

using nlohmann::json;

// --- CommandQueue ------------------------------------------------------------

std::optional<std::uint64_t> CommandQueue::submit_override(OverrideCommand cmd) {
  std::lock_guard lk(mu_);
  auto it = holders_.find(cmd.module);
  if (cmd.target_kw) {
    if (it != holders_.end() && it->second != cmd.operator_id) return std::nullopt;
    holders_[cmd.module] = cmd.operator_id;
  } else if (it != holders_.end()) {
    holders_.erase(it);
  }
  const std::uint64_t id = next_id_++;
  q_.push_back({id, std::move(cmd)});
  return id;
}

std::uint64_t CommandQueue::submit_scenario(ScenarioCommand cmd) {
  std::lock_guard lk(mu_);
  if (!cmd.preset.empty() || !cmd.trace.empty()) ++swaps_pending_;
  const std::uint64_t id = next_id_++;
  q_.push_back({id, std::move(cmd)});
  return id;
}

std::vector<Command> CommandQueue::drain() {
  std::lock_guard lk(mu_);
  std::vector<Command> out(std::make_move_iterator(q_.begin()), std::make_move_iterator(q_.end()));
  q_.clear();
  return out;
}

bool CommandQueue::empty() const {
  std::lock_guard lk(mu_);
  return q_.empty();
}

std::optional<std::string> CommandQueue::holder(std::size_t module) const {
  std::lock_guard lk(mu_);
  auto it = holders_.find(module);
  if (it == holders_.end()) return std::nullopt;
  return it->second;
}

// --- EventBus -------------------------------------------------------------------

void EventBus::publish(std::string type, std::string data) {
  {
    std::lock_guard lk(mu_);
    ring_.push_back({++seq_, std::move(type), std::move(data)});
    while (ring_.size() > cap_) ring_.pop_front();
  }
  cv_.notify_all();
}

std::vector<Event> EventBus::since(std::uint64_t after, int wait_ms) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, std::chrono::milliseconds(wait_ms), [&] { return seq_ > after || closed_; });
  std::vector<Event> out;
  for (const auto& e : ring_) {
    if (e.seq > after) out.push_back(e);
  }
  return out;
}

std::uint64_t EventBus::last_seq() const {
  std::lock_guard lk(mu_);
  return seq_;
}

void EventBus::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventBus::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

// --- totals -------------------------------------------------------------------------

void FlowTotals::add(const TickRow& r, double dt_s) {
  const double h = dt_s / 3600.0;
  energy_available_kwh += r.available_kw * h;
  energy_used_kwh += r.used_kw * h;
  energy_curtailed_kwh += r.curtailed_kw * h;
  methanol_produced_kg += r.methanol_kg;
  for (std::size_t s = 0; s < kSpeciesCount; ++s) {
    produced[s] += r.flows.produced[s];
    consumed[s] += r.flows.consumed[s];
    offtake[s] += r.flows.offtake[s];
    delivered[s] += r.flows.delivered[s];
    vented[s] += r.flows.vented[s];
  }
}

// --- Simulation ---------------------------------------------------------------------

PlantState scenario_initial_state(const Scenario& s) {
  PlantState st = initial_state(s.topology);
  for (const auto& im : s.initial_modules) {
    const auto m = *s.topology.module_index(im.module);
    st.modules[m].mode = im.mode;
    st.modules[m].load_kw = im.load_kw;
    st.modules[m].commanded_kw = im.load_kw;
    if (im.mode == ModuleMode::Starting) st.modules[m].startup_remaining_s = s.topology.modules[m].startup_time_s;
  }
  return st;
}

Simulation::Simulation(Scenario s, RunOptions opts)
    : sc_(std::move(s)), opts_(opts), control_((validate(sc_), sc_.topology), sc_.control) {
  total_ticks_ = static_cast<std::size_t>(std::llround(sc_.duration_s / sc_.dt_sim_s));
  state_ = scenario_initial_state(sc_);
  wind_ = make_wind_generator(sc_);
  wind_params_ = sc_.wind.generator;
  wind_synthetic_ = sc_.wind.kind == WindSourceKind::Synthetic;
  twin_ = std::make_unique<DigitalTwin>(sc_.topology);
  twin_->flush(state_);
  for (const auto& c : sc_.ships) {
    ship_offtake_left_.push_back(c.offtake_kg);
    ship_delivery_left_.push_back(c.delivery_kg);
  }
  report_.scenario = sc_;
  report_.initial_state = state_;
  interval_.start_s = 0.0;
  interval_.end_s = std::min(sc_.resched_interval_s, sc_.duration_s);
  if (opts_.publish_snapshots) publish_snapshot();
}

ClimatologyParams Simulation::climatology() const {
  if (sc_.forecast.climatology) return *sc_.forecast.climatology;
  if (wind_synthetic_) {
    ClimatologyParams c;
    c.mu = wind_params_.mu;
    c.sigma_inf = wind_params_.sigma_inf;
    c.rho = std::pow(wind_params_.rho, sc_.scheduler.step_s / wind_params_.step_s);
    return c;
  }
  if (step_history_.size() >= 10) return fit_climatology(step_history_);
  // Too little history for a fit: persistence.
  ClimatologyParams c;
  c.mu = step_history_.empty() ? 0.0 : step_history_.back();
  c.sigma_inf = 0.0;
  c.rho = 1.0;
  return c;
}

std::optional<std::size_t> Simulation::active_ship(double t) const {
  for (std::size_t i = 0; i < sc_.ships.size(); ++i) {
    const auto& c = sc_.ships[i];
    if (t >= c.arrival_s && t < c.arrival_s + c.duration_s) return i;
  }
  return std::nullopt;
}

void Simulation::raise(const Alarm& a) {
  report_.alarms.push_back(a);
  if (opts_.publish_events) events_.publish("alarm", to_json(a).dump());
}

void Simulation::apply_commands(double now) {
  for (auto& cmd : queue_.drain()) {
    json ack = {{"id", cmd.id}, {"time_s", now}};
    if (auto* o = std::get_if<OverrideCommand>(&cmd.body)) {
      const auto& name = sc_.topology.modules[o->module].name;
      ack["module"] = name;
      ack["operator_id"] = o->operator_id;
      if (o->target_kw) {
        control_.set_override(o->module, *o->target_kw, o->operator_id, now);
        const double applied = *control_.override_target(o->module);
        ack["kind"] = "override";
        ack["target_kw"] = applied;
        ack["effect"] = applied == *o->target_kw ? "accepted" : "clamped";
        pending_override_change_ = true;
        raise({now, Severity::Info, "OVERRIDE_APPLIED",
               "operator " + o->operator_id + " pinned " + name + " at " + std::to_string(applied) + " kW",
               name});
      } else {
        ack["kind"] = "release";
        if (control_.has_override(o->module)) {
          control_.release_override(o->module);
          ack["effect"] = "accepted";
          pending_override_change_ = true;
          raise({now, Severity::Info, "OVERRIDE_RELEASED",
                 "operator " + o->operator_id + " released " + name, name});
        } else {
          ack["effect"] = "rejected";
          ack["detail"] = "no active override";
        }
      }
    } else {
      auto& sc = std::get<ScenarioCommand>(cmd.body);
      ack["kind"] = "scenario";
      ack["effect"] = "accepted";
      if (!sc.preset.empty()) {
        const double v_now = wind_.at(now);
        wind_params_ = preset_generator(sc_.wind.generator, sc.preset);
        wind_ = WindGenerator(wind_params_, kernels::stream_seed(sc_.seed, 0x5a00 + swap_count_++), now, v_now);
        wind_synthetic_ = true;
        ack["preset"] = sc.preset;
        queue_.swap_applied();
      } else if (!sc.trace.empty()) {
        for (auto& p : sc.trace) p.time_s += now;
        wind_ = WindGenerator::from_trace(std::move(sc.trace));
        wind_synthetic_ = false;
        ++swap_count_;
        ack["trace"] = true;
        queue_.swap_applied();
      }
      if (sc.ship_now_s) {
        bool clash = false;
        for (const auto& c : sc_.ships) {
          if (now < c.arrival_s + c.duration_s && c.arrival_s < now + *sc.ship_now_s) clash = true;
        }
        if (clash) {
          ack["effect"] = "rejected";
          ack["detail"] = "a ship call already overlaps that window";
        } else {
          ShipCall c = periodic_ships(sc_.topology, now, 1.0, *sc.ship_now_s, now + 0.5).front();
          auto pos = std::upper_bound(sc_.ships.begin(), sc_.ships.end(), now,
                                      [](double t, const ShipCall& x) { return t < x.arrival_s; });
          const auto i = static_cast<std::size_t>(pos - sc_.ships.begin());
          sc_.ships.insert(pos, c);
          ship_offtake_left_.insert(ship_offtake_left_.begin() + static_cast<long>(i), c.offtake_kg);
          ship_delivery_left_.insert(ship_delivery_left_.begin() + static_cast<long>(i), c.delivery_kg);
          if (current_ship_ && *current_ship_ >= i) ++*current_ship_;
          ack["ship_now_s"] = *sc.ship_now_s;
        }
      }
      pending_scenario_change_ = true;
      raise({now, Severity::Info, "SCENARIO_CHANGED", "scenario command " + std::to_string(cmd.id) + " applied",
             "platform"});
    }
    if (opts_.publish_events) events_.publish("ack", ack.dump());
  }
}

void Simulation::reschedule(double now, double v, const std::string& reason) {
  const auto& cfg = sc_.scheduler;
  const std::size_t T = cfg.horizon_steps;
  const ClimatologyParams clim = climatology();
  auto ens = std::make_shared<ForecastEnsemble>(
      forecast_wind(v, clim, T, sc_.forecast.n_scenarios,
                    kernels::stream_seed(sc_.seed, 1000000 + solve_count_), now, cfg.step_s,
                    sc_.forecast.quantile_levels));
  auto pow = std::make_shared<PowerEnsemble>(wind_to_power(*ens, sc_.topology.turbine));
  const auto fk = pow->quantile_at(sc_.forecast.scheduler_quantile);

  ScheduleProblem p;
  p.topology = sc_.topology;
  p.horizon_steps = T;
  p.step_s = cfg.step_s;
  p.issued_at_s = now;
  p.forecast_issued_at_s = now;
  p.power_forecast_kw.assign(fk.begin(), fk.end());
  p.initial_levels = state_.levels;
  for (const auto& m : state_.modules) p.initial_loads_kw.push_back(m.load_kw);
  p.weights = cfg.weights;

  auto to_step = [&](double t, bool up) {
    const double x = (t - now) / cfg.step_s;
    const double r = up ? std::ceil(x - 1e-9) : std::floor(x + 1e-9);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(T)));
  };
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < sc_.ships.size(); ++i) {
    const auto& c = sc_.ships[i];
    if (c.arrival_s + c.duration_s <= now) continue;
    ShipWindow w;
    w.first_step = std::max(to_step(c.arrival_s, false), prev_end);
    w.end_step = to_step(c.arrival_s + c.duration_s, true);
    if (w.first_step >= w.end_step) continue;
    w.offtake_capacity = ship_offtake_left_[i];
    w.delivery_capacity = ship_delivery_left_[i];
    prev_end = w.end_step;
    p.ships.push_back(w);
  }
  for (const auto& m : sc_.maintenance) {
    if (m.end_s <= now) continue;
    MaintenanceWindow w;
    w.module = *sc_.topology.module_index(m.module);
    w.first_step = to_step(m.start_s, false);
    w.end_step = to_step(m.end_s, true);
    if (w.first_step < w.end_step) p.maintenance.push_back(w);
  }
  for (const auto& [m, target] : control_.active_overrides()) p.pins.push_back({m, 0, T, target});

  auto s = std::make_shared<Schedule>(schedule(p));
  if (s->status == LpStatus::Infeasible) {
    p.ramp_down_rows = false;
    s = std::make_shared<Schedule>(schedule(p));
    if (s->status == LpStatus::Optimal) {
      raise({now, Severity::Warning, "SCHEDULE_RELAXED",
             "ramp-down limits dropped to make the schedule feasible", "platform"});
    }
  }
  last_issued_ = now;
  ++solve_count_;
  wind_forecast_ = ens;
  power_forecast_ = pow;
  report_.schedules.push_back({reason, s});
  if (s->status == LpStatus::Optimal) {
    std::vector<SetpointFrame> frames;
    frames.reserve(T);
    for (std::size_t k = 0; k < T; ++k) {
      SetpointFrame f;
      f.valid_from_s = now + static_cast<double>(k) * cfg.step_s;
      f.issued_at_s = now;
      f.expected_power_kw = s->forecast_kw[k];
      for (std::size_t m = 0; m < sc_.topology.modules.size(); ++m) f.targets_kw.push_back(s->setpoints_kw[m][k]);
      frames.push_back(std::move(f));
    }
    control_.set_scheduler_frames(std::move(frames));
    schedule_ = s;
  } else {
    raise({now, Severity::Critical, "SCHEDULE_FAILED",
           "scheduler returned " + std::string(to_string(s->status)) + "; keeping the previous frames",
           "platform"});
  }
  control_.reset_deviation();
  if (opts_.publish_events) {
    json e = schedule_summary(*s, sc_.topology);
    e["reason"] = reason;
    events_.publish("schedule", e.dump());
  }
}

void Simulation::step() {
  if (done()) throw ContractViolation("Simulation::step called after the run finished");
  const double dt = sc_.dt_sim_s;
  const double t = state_.sim_time_s;
  const auto& topo = sc_.topology;

  apply_commands(t);
  const double v = wind_.at(t);
  const double k = std::floor(t / sc_.scheduler.step_s + 1e-9);
  if (k >= static_cast<double>(step_history_.size())) step_history_.push_back(v);

  const auto ship = active_ship(t);
  const bool ship_arrival = ship && ship != current_ship_;
  current_ship_ = ship;
  const bool deviation = control_.deviation_ticks() >= sc_.scheduler.deviation_ticks &&
                         t - last_deviation_solve_ >= sc_.scheduler.deviation_refractory_s;
  RescheduleTriggers trig{pending_override_change_ || pending_scenario_change_, ship_arrival, deviation};
  if (receding_step(t, last_issued_, ReschedulePolicy{sc_.resched_interval_s}, trig)) {
    std::string reason = "periodic";
    if (!last_issued_) reason = "initial";
    else if (pending_override_change_) reason = "override";
    else if (pending_scenario_change_) reason = "scenario";
    else if (ship_arrival) reason = "ship";
    else if (deviation) reason = "deviation";
    if (deviation) last_deviation_solve_ = t;
    reschedule(t, v, reason);
  }
  pending_override_change_ = false;
  pending_scenario_change_ = false;

  ControlTick ct = control_.tick(state_, v, dt);
  for (const auto& a : ct.alarms) {
    const bool cleared = a.code.size() > 8 && a.code.compare(a.code.size() - 8, 8, "_CLEARED") == 0;
    if (cleared) {
      active_alarms_.erase(a.code.substr(0, a.code.size() - 8) + "|" + a.node);
    } else {
      active_alarms_[a.code + "|" + a.node] = a;
    }
    raise(a);
  }

  ShipOrder order;
  if (ship) {
    order.offtake = ship_offtake_left_[*ship];
    order.delivery = ship_delivery_left_[*ship];
  }
  PlantStepResult r = step_plant(topo, state_, ct.commands_kw, order, v, dt);
  if (ship) {
    for (std::size_t s = 0; s < kSpeciesCount; ++s) {
      ship_offtake_left_[*ship][s] -= r.flows.offtake[s];
      ship_delivery_left_[*ship][s] -= r.flows.delivered[s];
    }
  }
  for (std::size_t m = 0; m < topo.modules.size(); ++m) {
    if (state_.modules[m].mode == ModuleMode::Running && r.state.modules[m].mode == ModuleMode::Stopping &&
        ct.commands_kw[m] >= topo.modules[m].p_min_kw() && ct.commands_kw[m] > 0.0) {
      raise({t, Severity::Warning, "MODULE_TRIP",
             topo.modules[m].name + " tripped: feed or storage headroom below minimum load",
             topo.modules[m].name});
    }
  }

  TickRow row;
  row.time_s = r.state.sim_time_s;
  row.wind_mps = v;
  row.available_kw = r.state.available_power_kw;
  row.curtailed_kw = r.state.curtailed_power_kw;
  for (std::size_t m = 0; m < topo.modules.size(); ++m) {
    row.used_kw += r.flows.module_energy_kwh[m] * 3600.0 / dt;
    row.load_kw.push_back(r.state.modules[m].load_kw);
    if (topo.modules[m].product == Species::Methanol) row.methanol_kg += r.flows.module_production_kg[m];
  }
  row.command_kw = ct.commands_kw;
  row.level = r.state.levels;
  row.flows = r.flows;
  report_.totals.add(row, dt);
  interval_.totals.add(row, dt);
  if (opts_.record_replay) report_.replay.push_back({t, v, ct.commands_kw, order});

  state_ = std::move(r.state);
  report_.ticks.push_back(std::move(row));
  if (opts_.record_states) report_.states.push_back(state_);
  twin_->flush(state_);
  ++tick_;

  if (done() || state_.sim_time_s >= interval_.end_s - 1e-9 * std::max(1.0, interval_.end_s)) {
    interval_.end_s = state_.sim_time_s;
    report_.intervals.push_back(interval_);
    interval_ = IntervalRow{};
    interval_.start_s = state_.sim_time_s;
    interval_.end_s = std::min(state_.sim_time_s + sc_.resched_interval_s, sc_.duration_s);
  }
  if (opts_.publish_snapshots) publish_snapshot();
  if (opts_.publish_events) {
    json f = {{"frame", tick_},
              {"sim_time_s", state_.sim_time_s},
              {"wind_mps", v},
              {"available_power_kw", state_.available_power_kw},
              {"curtailed_power_kw", state_.curtailed_power_kw}};
    json loads = json::object();
    for (std::size_t m = 0; m < topo.modules.size(); ++m) loads[topo.modules[m].name] = state_.modules[m].load_kw;
    json levels = json::object();
    for (std::size_t s = 0; s < topo.storages.size(); ++s) levels[topo.storages[s].name] = state_.levels[s];
    f["loads_kw"] = loads;
    f["levels"] = levels;
    events_.publish("frame", f.dump());
  }
}

void Simulation::publish_snapshot() {
  auto snap = std::make_shared<Snapshot>();
  snap->time_s = state_.sim_time_s;
  snap->state = state_;
  snap->schedule = schedule_;
  snap->wind_forecast = wind_forecast_;
  snap->power_forecast = power_forecast_;
  for (const auto& [k, a] : active_alarms_) snap->active_alarms.push_back(a);
  snap->overrides = control_.active_overrides();
  for (const auto& r : telemetry_from_state(sc_.topology, state_)) {
    snap->properties[r.node + "." + r.property] = r.value;
  }
  twin_->publish(std::move(snap));
}

RunReport Simulation::take_report() {
  report_.final_state = state_;
  report_.telemetry_rejected = twin_->rejected_count();
  report_.scenario = sc_;
  return std::move(report_);
}

RunReport run_headless(const Scenario& s, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  Simulation sim(s, opts);
  while (!sim.done()) sim.step();
  RunReport r = sim.take_report();
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const InvalidSetpoint*>(&e)) {
    return 1;
  }
  if (dynamic_cast<const PowerInfeasible*>(&e) || dynamic_cast<const FeasibilityCheckFailed*>(&e) ||
      dynamic_cast<const ContractViolation*>(&e)) {
    return 3;
  }
  return 2;
}

}  // namespace ptx
