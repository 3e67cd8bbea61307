#include "ptx/twin.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>

#include "ptx/error.hpp"

namespace ptx {

std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::Platform: return "Platform";
    case NodeType::Module: return "Module";
    case NodeType::Storage: return "Storage";
    case NodeType::Sensor: return "Sensor";
  }
  return "?";
}

std::string_view to_string(ModelTag t) {
  switch (t) {
    case ModelTag::DataModel: return "DataModel";
    case ModelTag::InformationModel: return "InformationModel";
    case ModelTag::BehaviouralModel: return "BehaviouralModel";
  }
  return "?";
}

const InfoNode* InfoNode::find(std::string_view node_id) const {
  if (id == node_id) return this;
  for (const auto& c : children) {
    if (const InfoNode* n = c.find(node_id)) return n;
  }
  return nullptr;
}

namespace {

struct PropSpec {
  const char* name;
  const char* unit;
};

constexpr PropSpec kPlatformProps[] = {
    {"wind_mps", "m/s"}, {"available_power_kw", "kW"}, {"curtailed_power_kw", "kW"}};
constexpr PropSpec kModuleProps[] = {{"load_kw", "kW"},      {"commanded_kw", "kW"},
                                     {"mode", "enum"},       {"startup_remaining_s", "s"},
                                     {"energy_kwh", "kWh"},  {"production_kg", "kg"}};

std::string storage_unit(const StorageParams& s) {
  return s.species == Species::Electricity ? "kWh" : "kg";
}

std::vector<PropSpec> storage_props() {
  return {{"level", ""}, {"produced", ""}, {"consumed", ""}, {"offtake", ""}, {"delivered", ""}};
}

InfoNode sensor(const std::string& owner, const std::string& prop, const std::string& unit) {
  InfoNode n;
  n.id = owner + "." + prop;
  n.type = NodeType::Sensor;
  n.properties = {{"property", {prop, ""}}, {"unit", {unit, ""}}};
  return n;
}

}  // namespace

InfoNode build_information_model(const PlantTopology& topo) {
  std::set<std::string> ids{"platform"};
  auto claim = [&](const std::string& id) {
    if (!ids.insert(id).second) throw DuplicateName("duplicate information-model id '" + id + "'");
  };
  InfoNode root;
  root.id = "platform";
  root.type = NodeType::Platform;
  root.properties = {{"turbines", {std::to_string(topo.turbine.count), ""}},
                     {"rated_power_kw", {std::to_string(topo.turbine.rated_power_kw), "kW"}}};
  for (const auto& p : kPlatformProps) root.children.push_back(sensor("platform", p.name, p.unit));
  for (const auto& m : topo.modules) {
    claim(m.name);
    InfoNode n;
    n.id = m.name;
    n.type = NodeType::Module;
    n.properties = {{"kind", {std::string(to_string(m.kind)), ""}},
                    {"product", {std::string(to_string(m.product)), ""}},
                    {"p_max", {std::to_string(m.p_max_kw), "kW"}}};
    for (const auto& p : kModuleProps) n.children.push_back(sensor(m.name, p.name, p.unit));
    root.children.push_back(std::move(n));
  }
  for (const auto& s : topo.storages) {
    claim(s.name);
    InfoNode n;
    n.id = s.name;
    n.type = NodeType::Storage;
    n.properties = {{"species", {std::string(to_string(s.species)), ""}},
                    {"capacity", {std::to_string(s.capacity), storage_unit(s)}}};
    for (const auto& p : storage_props()) n.children.push_back(sensor(s.name, p.name, storage_unit(s)));
    root.children.push_back(std::move(n));
  }
  for (const auto& c : root.children) {
    if (c.type != NodeType::Sensor) {
      for (const auto& s : c.children) claim(s.id);
    } else {
      claim(c.id);
    }
  }
  return root;
}

std::vector<TelemetryRecord> telemetry_from_state(const PlantTopology& topo,
                                                  const PlantState& st) {
  std::vector<TelemetryRecord> out;
  const double t = st.sim_time_s;
  out.push_back({t, "platform", "wind_mps", st.wind_mps, "m/s"});
  out.push_back({t, "platform", "available_power_kw", st.available_power_kw, "kW"});
  out.push_back({t, "platform", "curtailed_power_kw", st.curtailed_power_kw, "kW"});
  const auto& fl = st.last_flows;
  for (std::size_t m = 0; m < topo.modules.size(); ++m) {
    const auto& name = topo.modules[m].name;
    const auto& ms = st.modules[m];
    out.push_back({t, name, "load_kw", ms.load_kw, "kW"});
    out.push_back({t, name, "commanded_kw", ms.commanded_kw, "kW"});
    out.push_back({t, name, "mode", static_cast<double>(ms.mode), "enum"});
    out.push_back({t, name, "startup_remaining_s", ms.startup_remaining_s, "s"});
    out.push_back({t, name, "energy_kwh", m < fl.module_energy_kwh.size() ? fl.module_energy_kwh[m] : 0.0, "kWh"});
    out.push_back({t, name, "production_kg",
                   m < fl.module_production_kg.size() ? fl.module_production_kg[m] : 0.0, "kg"});
  }
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    const auto& s = topo.storages[k];
    const std::string u = storage_unit(s);
    const std::size_t i = idx(s.species);
    out.push_back({t, s.name, "level", st.levels[k], u});
    out.push_back({t, s.name, "produced", fl.produced[i], u});
    out.push_back({t, s.name, "consumed", fl.consumed[i], u});
    out.push_back({t, s.name, "offtake", fl.offtake[i], u});
    out.push_back({t, s.name, "delivered", fl.delivered[i], u});
  }
  return out;
}

// ---------------------------------------------------------------------------

TelemetryLog::~TelemetryLog() {
  for (auto& c : chunks_) delete c.load(std::memory_order_relaxed);
}

void TelemetryLog::append(TelemetrySample s) {
  const std::size_t n = size_.load(std::memory_order_relaxed);
  const std::size_t ci = n / kChunk;
  if (ci >= kMaxChunks) throw ContractViolation("telemetry stream is full");
  Chunk* c = chunks_[ci].load(std::memory_order_relaxed);
  if (!c) {
    c = new Chunk;
    chunks_[ci].store(c, std::memory_order_release);
  }
  c->data[n % kChunk] = s;
  size_.store(n + 1, std::memory_order_release);
}

TelemetrySample TelemetryLog::at(std::size_t i) const {
  return chunks_[i / kChunk].load(std::memory_order_acquire)->data[i % kChunk];
}

std::optional<TelemetrySample> TelemetryLog::back() const {
  const std::size_t n = size();
  if (n == 0) return std::nullopt;
  return at(n - 1);
}

std::vector<TelemetrySample> TelemetryLog::range(double t_from, double t_to) const {
  const std::size_t n = size();
  std::vector<TelemetrySample> out;
  if (n == 0 || t_from > t_to) return out;
  // first index with time >= t_from
  std::size_t lo = 0, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (at(mid).time_s < t_from) lo = mid + 1; else hi = mid;
  }
  for (std::size_t i = lo; i < n; ++i) {
    const TelemetrySample s = at(i);
    if (s.time_s > t_to) break;
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ModelEntry> build_model_registry(const PlantTopology& topo) {
  std::vector<ModelEntry> reg;
  reg.push_back({"platform", ModelTag::InformationModel, "hierarchical information model", nullptr});
  for (const auto& m : topo.modules) {
    reg.push_back({m.name, ModelTag::BehaviouralModel,
                   std::string(to_string(m.kind)) + " mode machine and conversion (step_module)",
                   &step_module});
  }
  for (const auto& s : topo.storages) {
    reg.push_back({s.name, ModelTag::BehaviouralModel,
                   "storage balance, forward Euler (step_plant)", nullptr});
  }
  auto add_sensors = [&](const std::string& owner, auto&& props) {
    for (const auto& p : props) {
      reg.push_back({owner + "." + p.name, ModelTag::DataModel, "telemetry stream", nullptr});
    }
  };
  add_sensors("platform", kPlatformProps);
  for (const auto& m : topo.modules) add_sensors(m.name, kModuleProps);
  for (const auto& s : topo.storages) add_sensors(s.name, storage_props());
  return reg;
}

DigitalTwin::DigitalTwin(PlantTopology topo)
    : topo_(std::move(topo)), model_(build_information_model(topo_)),
      registry_(build_model_registry(topo_)) {
  for (const auto& r : telemetry_from_state(topo_, initial_state(topo_))) {
    auto key = std::make_pair(r.node, r.property);
    order_.push_back(key);
    auto s = std::make_unique<Stream>();
    s->unit = r.unit;
    streams_.emplace(std::move(key), std::move(s));
  }
}

const DigitalTwin::Stream& DigitalTwin::stream(const std::string& node,
                                               const std::string& property) const {
  auto it = streams_.find({node, property});
  if (it == streams_.end()) throw UnknownNode("unknown stream '" + node + "." + property + "'");
  return *it->second;
}

IngestResult DigitalTwin::ingest(std::span<const TelemetryRecord> batch) {
  std::vector<Stream*> target;
  target.reserve(batch.size());
  for (const auto& r : batch) {
    auto it = streams_.find({r.node, r.property});
    if (it == streams_.end()) throw UnknownNode("unknown stream '" + r.node + "." + r.property + "'");
    if (std::isnan(r.time_s)) throw ContractViolation("telemetry time is NaN");
    target.push_back(it->second.get());
  }
  IngestResult res;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Stream& s = *target[i];
    auto head = s.log.back();
    if (head && batch[i].time_s < head->time_s) {
      ++res.rejected;
      continue;
    }
    s.log.append({batch[i].time_s, batch[i].value});
    ++res.accepted;
  }
  if (res.rejected) {
    rejected_ += res.rejected;
    throw TimeRegression(std::to_string(res.rejected) + " record(s) older than their stream head");
  }
  return res;
}

void DigitalTwin::flush(const PlantState& state) {
  const auto recs = telemetry_from_state(topo_, state);
  ingest(recs);
}

bool DigitalTwin::has_stream(const std::string& node, const std::string& property) const {
  return streams_.count({node, property}) > 0;
}

std::vector<std::pair<std::string, std::string>> DigitalTwin::streams() const { return order_; }

std::string DigitalTwin::unit_of(const std::string& node, const std::string& property) const {
  return stream(node, property).unit;
}

std::optional<TelemetrySample> DigitalTwin::latest(const std::string& node,
                                                   const std::string& property) const {
  return stream(node, property).log.back();
}

std::vector<TelemetrySample> DigitalTwin::query_history(const std::string& node,
                                                        const std::string& property,
                                                        double t_from, double t_to) const {
  const Stream& s = stream(node, property);
  if (t_from > t_to) throw ContractViolation("query_history: t_from > t_to");
  return s.log.range(t_from, t_to);
}

std::size_t DigitalTwin::stream_size(const std::string& node, const std::string& property) const {
  return stream(node, property).log.size();
}

void DigitalTwin::publish(std::shared_ptr<const Snapshot> snap) {
  std::lock_guard lk(snap_mu_);
  snap_ = std::move(snap);
}

std::shared_ptr<const Snapshot> DigitalTwin::snapshot() const {
  std::lock_guard lk(snap_mu_);
  return snap_;
}

namespace {

void put_num(std::ostream& out, double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, r.ptr - buf);
}

}  // namespace

void DigitalTwin::export_history_csv(std::ostream& out) const {
  out << "time_s,node_id,property,value,unit\n";
  for (const auto& key : order_) {
    const Stream& s = *streams_.at(key);
    const std::size_t n = s.log.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto smp = s.log.at(i);
      put_num(out, smp.time_s);
      out << ',' << key.first << ',' << key.second << ',';
      put_num(out, smp.value);
      out << ',' << s.unit << '\n';
    }
  }
}

std::vector<std::string> sync_mismatches(const DigitalTwin& twin, const PlantState& state) {
  std::vector<std::string> bad;
  for (const auto& r : telemetry_from_state(twin.topology(), state)) {
    auto v = twin.latest(r.node, r.property);
    if (!v || v->value != r.value || v->time_s != r.time_s) {
      bad.push_back(r.node + "." + r.property);
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------

std::vector<double> forecast_wind_per_tick(const Snapshot& snap, double duration_s, double dt_s) {
  const auto ticks = static_cast<std::size_t>(std::llround(duration_s / dt_s));
  std::vector<double> out(ticks, snap.state.wind_mps);
  const auto& f = snap.wind_forecast;
  if (!f || f->horizon_steps == 0) return out;
  std::size_t li = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < f->quantile_levels.size(); ++i) {
    const double d = std::abs(f->quantile_levels[i] - 0.5);
    if (d < best) {
      best = d;
      li = i;
    }
  }
  const auto row = f->quantile_row(li);
  for (std::size_t i = 0; i < ticks; ++i) {
    const double t = snap.time_s + static_cast<double>(i) * dt_s;
    const double k = std::floor((t - f->issued_at_s) / f->step_s);
    const auto ki = static_cast<std::size_t>(std::clamp(k, 0.0, double(f->horizon_steps - 1)));
    out[i] = row[ki];
  }
  return out;
}

WhatIfResult what_if(const PlantTopology& topo, const Snapshot& snap, const WhatIfRequest& req) {
  const std::size_t nm = topo.modules.size();
  if (!(req.dt_s > 0.0)) throw InvalidSetpoint("what-if: dt must be > 0");
  if (!(req.duration_s >= 0.0)) throw InvalidSetpoint("what-if: duration must be >= 0");
  if (!(req.setpoint_step_s > 0.0)) throw InvalidSetpoint("what-if: setpoint step must be > 0");
  for (const auto& row : req.setpoints_kw) {
    if (row.size() != nm) throw InvalidSetpoint("what-if: one setpoint per module required");
    for (std::size_t m = 0; m < nm; ++m) {
      if (!std::isfinite(row[m]) || row[m] < 0.0 || row[m] > topo.modules[m].p_max_kw) {
        throw InvalidSetpoint("what-if: setpoint for '" + topo.modules[m].name +
                              "' outside [0, p_max]");
      }
    }
  }
  const auto ticks = static_cast<std::size_t>(std::llround(req.duration_s / req.dt_s));
  if (ticks > 0 && req.setpoints_kw.empty()) throw InvalidSetpoint("what-if: no setpoints given");
  std::vector<double> wind = req.wind_mps;
  if (wind.empty()) wind = forecast_wind_per_tick(snap, req.duration_s, req.dt_s);
  if (wind.size() == 1) wind.assign(std::max<std::size_t>(ticks, 1), wind[0]);
  if (wind.size() < ticks) throw InvalidSetpoint("what-if: wind trace shorter than the run");
  if (!req.ship_orders.empty() && req.ship_orders.size() < ticks) {
    throw InvalidSetpoint("what-if: ship orders shorter than the run");
  }

  const double t0 = snap.state.sim_time_s;
  std::optional<ControlLayer> ctl;
  if (req.through_control) {
    ctl.emplace(topo, req.control ? *req.control : default_control_config(topo));
    std::vector<SetpointFrame> frames;
    for (std::size_t i = 0; i < req.setpoints_kw.size(); ++i) {
      SetpointFrame f;
      f.valid_from_s = t0 + static_cast<double>(i) * req.setpoint_step_s;
      f.issued_at_s = f.valid_from_s;
      f.targets_kw.assign(req.setpoints_kw[i].begin(), req.setpoints_kw[i].end());
      frames.push_back(std::move(f));
    }
    ctl->set_scheduler_frames(std::move(frames));
  }

  WhatIfResult res;
  PlantState state = snap.state;  // the live state is never touched
  double methanol = 0.0;
  std::vector<double> cmd(nm);
  const ShipOrder none{};
  for (std::size_t i = 0; i < ticks; ++i) {
    const double v = wind[i];
    if (ctl) {
      cmd = ctl->tick(state, v, req.dt_s).commands_kw;
    } else {
      const double t = static_cast<double>(i) * req.dt_s;
      auto si = static_cast<std::size_t>(std::floor(t / req.setpoint_step_s + 1e-9));
      si = std::min(si, req.setpoints_kw.size() - 1);
      cmd = req.setpoints_kw[si];
    }
    const ShipOrder& order = req.ship_orders.empty() ? none : req.ship_orders[i];
    PlantStepResult r;
    try {
      r = step_plant(topo, state, cmd, order, v, req.dt_s);
    } catch (const PowerInfeasible& e) {
      if (ctl) throw;  // the control layer should never get here
      // raw setpoints are caller input, not an internal fault
      throw InvalidSetpoint(std::string("what-if: raw setpoints exceed available power: ") + e.what());
    }
    state = std::move(r.state);
    for (std::size_t m = 0; m < nm; ++m) {
      if (topo.modules[m].product == Species::Methanol) methanol += r.flows.module_production_kg[m];
    }
    res.time_s.push_back(state.sim_time_s);
    res.levels.push_back(state.levels);
    std::vector<double> loads(nm);
    for (std::size_t m = 0; m < nm; ++m) loads[m] = state.modules[m].load_kw;
    res.loads_kw.push_back(std::move(loads));
    res.methanol_kg.push_back(methanol);
    res.flows.push_back(std::move(r.flows));
    if (req.record_states) res.states.push_back(state);
  }
  res.final_state = std::move(state);
  return res;
}

}  // namespace ptx
