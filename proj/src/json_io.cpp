#include "ptx/json_io.hpp"

#include <cmath>

#include "ptx/error.hpp"

namespace ptx {

using nlohmann::json;

namespace {

json species_map(const PerSpecies<double>& v) {
  json j = json::object();
  for (Species s : kAllSpecies) j[std::string(to_string(s))] = v[idx(s)];
  return j;
}

}  // namespace

json to_json(const PlantState& s, const PlantTopology& topo) {
  json j;
  j["sim_time_s"] = s.sim_time_s;
  j["wind_mps"] = s.wind_mps;
  j["available_power_kw"] = s.available_power_kw;
  j["curtailed_power_kw"] = s.curtailed_power_kw;
  json mods = json::array();
  for (std::size_t m = 0; m < topo.modules.size(); ++m) {
    const auto& ms = s.modules[m];
    mods.push_back({{"name", topo.modules[m].name},
                    {"mode", std::string(to_string(ms.mode))},
                    {"load_kw", ms.load_kw},
                    {"commanded_kw", ms.commanded_kw},
                    {"startup_remaining_s", ms.startup_remaining_s}});
  }
  j["modules"] = mods;
  json st = json::array();
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    const auto& sp = topo.storages[k];
    st.push_back({{"name", sp.name},
                  {"species", std::string(to_string(sp.species))},
                  {"level", s.levels[k]},
                  {"capacity", sp.capacity},
                  {"fill_fraction", sp.capacity > 0 ? s.levels[k] / sp.capacity : 0.0}});
  }
  j["storages"] = st;
  const auto& f = s.last_flows;
  j["last_flows"] = {{"produced", species_map(f.produced)},
                     {"consumed", species_map(f.consumed)},
                     {"offtake", species_map(f.offtake)},
                     {"delivered", species_map(f.delivered)},
                     {"vented", species_map(f.vented)},
                     {"module_energy_kwh", f.module_energy_kwh},
                     {"module_production_kg", f.module_production_kg}};
  return j;
}

json schedule_summary(const Schedule& s, const PlantTopology& topo) {
  json pinned = json::array();
  for (auto m : s.pinned_modules) pinned.push_back(topo.modules[m].name);
  return {{"issued_at_s", s.issued_at_s},
          {"forecast_issued_at_s", s.forecast_issued_at_s},
          {"status", std::string(to_string(s.status))},
          {"objective", s.objective},
          {"methanol_kg", s.methanol_kg},
          {"step_s", s.step_s},
          {"horizon_steps", s.horizon_steps},
          {"pinned_modules", pinned},
          {"ramp_down_relaxed", s.ramp_down_relaxed},
          {"lp_iterations", s.lp_iterations}};
}

json to_json(const Schedule& s, const PlantTopology& topo) {
  json j = schedule_summary(s, topo);
  json sp = json::object();
  for (std::size_t m = 0; m < s.setpoints_kw.size(); ++m) sp[topo.modules[m].name] = s.setpoints_kw[m];
  j["setpoints_kw"] = sp;
  json st = json::object();
  for (std::size_t k = 0; k < s.storage_kg.size(); ++k) st[topo.storages[k].name] = s.storage_kg[k];
  j["storage_trajectories"] = st;
  j["curtail_kw"] = s.curtail_kw;
  j["shortfall_kw"] = s.shortfall_kw;
  j["forecast_kw"] = s.forecast_kw;
  return j;
}

json to_json(const Alarm& a) {
  return {{"time_s", a.time_s},
          {"severity", std::string(to_string(a.severity))},
          {"code", a.code},
          {"message", a.message},
          {"node", a.node}};
}

json to_json(const InfoNode& n) {
  json props = json::object();
  for (const auto& [k, v] : n.properties) props[k] = {{"value", v.text}, {"unit", v.unit}};
  json kids = json::array();
  for (const auto& c : n.children) kids.push_back(to_json(c));
  return {{"id", n.id}, {"type", std::string(to_string(n.type))}, {"properties", props}, {"children", kids}};
}

json to_json(const PowerEnsemble& p) {
  json q = json::object();
  for (std::size_t i = 0; i < p.quantile_levels.size(); ++i) {
    const auto row = p.quantile_row(i);
    q[std::to_string(p.quantile_levels[i])] = std::vector<double>(row.begin(), row.end());
  }
  return {{"issued_at_s", p.issued_at_s},
          {"step_s", p.step_s},
          {"horizon_steps", p.horizon_steps},
          {"n_scenarios", p.n_scenarios},
          {"quantile_levels", p.quantile_levels},
          {"quantiles_kw", q}};
}

json to_json(const ForecastEnsemble& e) {
  json q = json::object();
  for (std::size_t i = 0; i < e.quantile_levels.size(); ++i) {
    const auto row = e.quantile_row(i);
    q[std::to_string(e.quantile_levels[i])] = std::vector<double>(row.begin(), row.end());
  }
  return {{"issued_at_s", e.issued_at_s},
          {"step_s", e.step_s},
          {"horizon_steps", e.horizon_steps},
          {"n_scenarios", e.n_scenarios},
          {"mean_path_mps", e.mean_path},
          {"quantile_levels", e.quantile_levels},
          {"quantiles_mps", q}};
}

json to_json(const WhatIfResult& r, const PlantTopology& topo) {
  json levels = json::object();
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    std::vector<double> v;
    v.reserve(r.levels.size());
    for (const auto& row : r.levels) v.push_back(row[k]);
    levels[topo.storages[k].name] = v;
  }
  json loads = json::object();
  for (std::size_t m = 0; m < topo.modules.size(); ++m) {
    std::vector<double> v;
    v.reserve(r.loads_kw.size());
    for (const auto& row : r.loads_kw) v.push_back(row[m]);
    loads[topo.modules[m].name] = v;
  }
  return {{"time_s", r.time_s},
          {"levels", levels},
          {"loads_kw", loads},
          {"methanol_kg", r.methanol_kg},
          {"final_state", to_json(r.final_state, topo)}};
}

WhatIfRequest whatif_request_from_json(const json& j, const PlantTopology& topo,
                                       double default_dt_s) {
  if (!j.is_object()) throw InvalidSetpoint("what-if request must be a JSON object");
  auto number = [&](const char* key, double def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    if (!j.at(key).is_number()) throw InvalidSetpoint(std::string(key) + " must be a number");
    return j.at(key).get<double>();
  };
  WhatIfRequest r;
  r.setpoint_step_s = number("setpoint_step_s", 900.0);
  r.dt_s = number("dt_s", default_dt_s);
  if (j.contains("through_control")) {
    if (!j.at("through_control").is_boolean()) throw InvalidSetpoint("through_control must be a boolean");
    r.through_control = j.at("through_control").get<bool>();
  }
  if (!j.contains("setpoints") || !j.at("setpoints").is_array()) {
    throw InvalidSetpoint("setpoints must be an array");
  }
  for (const auto& row : j.at("setpoints")) {
    std::vector<double> v(topo.modules.size(), 0.0);
    if (row.is_array()) {
      if (row.size() != topo.modules.size()) throw InvalidSetpoint("setpoint rows need one value per module");
      for (std::size_t m = 0; m < v.size(); ++m) {
        if (!row[m].is_number()) throw InvalidSetpoint("setpoints must be numbers");
        v[m] = row[m].get<double>();
      }
    } else if (row.is_object()) {
      for (auto it = row.begin(); it != row.end(); ++it) {
        auto m = topo.module_index(it.key());
        if (!m) throw InvalidSetpoint("unknown module '" + it.key() + "'");
        if (!it.value().is_number()) throw InvalidSetpoint("setpoints must be numbers");
        v[*m] = it.value().get<double>();
      }
    } else {
      throw InvalidSetpoint("setpoint rows must be arrays or objects");
    }
    r.setpoints_kw.push_back(std::move(v));
  }
  r.duration_s = number("duration_s", r.setpoint_step_s * static_cast<double>(r.setpoints_kw.size()));
  if (j.contains("wind_mps")) {
    const auto& w = j.at("wind_mps");
    if (w.is_number()) {
      r.wind_mps = {w.get<double>()};
    } else if (w.is_array()) {
      for (const auto& x : w) {
        if (!x.is_number()) throw InvalidSetpoint("wind_mps entries must be numbers");
        r.wind_mps.push_back(x.get<double>());
      }
    } else if (!w.is_null()) {
      throw InvalidSetpoint("wind_mps must be a number or an array");
    }
  }
  for (double v : r.wind_mps) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidSetpoint("wind_mps must be finite and >= 0");
  }
  return r;
}

}  // namespace ptx
