#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ptx/error.hpp"
#include "ptx/harness.hpp"
#include "ptx/json_io.hpp"

namespace ptx {

using nlohmann::json;

namespace {

void put(std::string& out, double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

json species_map(const PerSpecies<double>& v) {
  json j = json::object();
  for (Species s : kAllSpecies) j[std::string(to_string(s))] = v[idx(s)];
  return j;
}

json totals_json(const FlowTotals& t) {
  return {{"energy_available_kwh", t.energy_available_kwh},
          {"energy_used_kwh", t.energy_used_kwh},
          {"energy_curtailed_kwh", t.energy_curtailed_kwh},
          {"methanol_produced_kg", t.methanol_produced_kg},
          {"produced_kg", species_map(t.produced)},
          {"consumed_kg", species_map(t.consumed)},
          {"offtake_kg", species_map(t.offtake)},
          {"delivered_kg", species_map(t.delivered)},
          {"vented_kg", species_map(t.vented)}};
}

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << body;
  if (!f) throw IoError("write failed: " + p.string());
}

}  // namespace

std::string report_json_text(const RunReport& r) {
  const auto& topo = r.scenario.topology;
  json j;
  j["scenario"] = scenario_to_json(r.scenario);
  j["ticks"] = r.ticks.size();
  j["totals"] = totals_json(r.totals);

  // Per-storage mass balance: initial + in - out = final.
  json bal = json::array();
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    const auto s = idx(topo.storages[k].species);
    const double init = r.initial_state.levels[k];
    const double fin = r.final_state.levels[k];
    const double in = r.totals.produced[s] + r.totals.delivered[s];
    const double out = r.totals.consumed[s] + r.totals.offtake[s];
    const double residual = init + in - out - fin;
    bal.push_back({{"storage", topo.storages[k].name},
                   {"initial", init},
                   {"final", fin},
                   {"inflow", in},
                   {"outflow", out},
                   {"residual", residual},
                   {"relative_residual", std::abs(residual) / std::max({1.0, init, in, out})}});
  }
  j["mass_balance"] = bal;
  const auto& t = r.totals;
  const auto el = idx(Species::Electricity);
  const double e_res = t.energy_available_kwh - t.energy_used_kwh - t.energy_curtailed_kwh -
                       t.produced[el] + t.consumed[el];
  j["energy_balance"] = {{"available_kwh", t.energy_available_kwh},
                         {"used_kwh", t.energy_used_kwh},
                         {"curtailed_kwh", t.energy_curtailed_kwh},
                         {"battery_charge_kwh", t.produced[el]},
                         {"battery_discharge_kwh", t.consumed[el]},
                         {"residual_kwh", e_res}};
  if (r.scenario.production_goal_kg) {
    const double g = *r.scenario.production_goal_kg;
    j["production_goal"] = {{"goal_kg", g},
                            {"produced_kg", t.methanol_produced_kg},
                            {"fraction", g > 0 ? t.methanol_produced_kg / g : 0.0}};
  }

  json iv = json::array();
  for (const auto& i : r.intervals) {
    json row = totals_json(i.totals);
    row["start_s"] = i.start_s;
    row["end_s"] = i.end_s;
    iv.push_back(std::move(row));
  }
  j["intervals"] = iv;

  json sch = json::array();
  for (const auto& e : r.schedules) {
    json s = schedule_summary(*e.schedule, topo);
    s["reason"] = e.reason;
    sch.push_back(std::move(s));
  }
  j["schedules"] = sch;

  json al = json::array();
  for (const auto& a : r.alarms) al.push_back(to_json(a));
  j["alarms"] = al;
  j["final_state"] = to_json(r.final_state, topo);
  j["telemetry_rejected"] = r.telemetry_rejected;
  return j.dump(2) + "\n";
}

std::string timeseries_csv_text(const RunReport& r) {
  const auto& topo = r.scenario.topology;
  std::string out = "time_s,wind_mps,available_kw,used_kw,curtailed_kw";
  for (const auto& m : topo.modules) out += ",load_" + m.name + "_kw";
  for (const auto& m : topo.modules) out += ",command_" + m.name + "_kw";
  for (const auto& s : topo.storages) out += ",level_" + s.name;
  out += ",methanol_kg\n";
  out.reserve(out.size() + r.ticks.size() * 200);
  for (const auto& row : r.ticks) {
    put(out, row.time_s);
    for (double v : {row.wind_mps, row.available_kw, row.used_kw, row.curtailed_kw}) {
      out += ',';
      put(out, v);
    }
    for (double v : row.load_kw) {
      out += ',';
      put(out, v);
    }
    for (double v : row.command_kw) {
      out += ',';
      put(out, v);
    }
    for (double v : row.level) {
      out += ',';
      put(out, v);
    }
    out += ',';
    put(out, row.methanol_kg);
    out += '\n';
  }
  return out;
}

std::string alarms_csv_text(const RunReport& r) {
  std::string out = "time_s,severity,code,node,message\n";
  for (const auto& a : r.alarms) {
    put(out, a.time_s);
    out += ',';
    out += to_string(a.severity);
    out += ',' + csv_field(a.code) + ',' + csv_field(a.node) + ',' + csv_field(a.message) + '\n';
  }
  return out;
}

std::string schedules_json_text(const RunReport& r) {
  json arr = json::array();
  for (const auto& e : r.schedules) {
    json s = to_json(*e.schedule, r.scenario.topology);
    s["reason"] = e.reason;
    arr.push_back(std::move(s));
  }
  return arr.dump() + "\n";
}

void emit_report(const RunReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  const fs::path d(dir);
  write_file(d / "report.json", report_json_text(r));
  write_file(d / "timeseries.csv", timeseries_csv_text(r));
  write_file(d / "alarms.csv", alarms_csv_text(r));
  write_file(d / "schedules.json", schedules_json_text(r));
  json rt = {{"wall_clock_s", r.wall_clock_s},
             {"ticks", r.ticks.size()},
             {"schedule_solves", r.schedules.size()}};
  write_file(d / "runtime.json", rt.dump(2) + "\n");
}

}  // namespace ptx
