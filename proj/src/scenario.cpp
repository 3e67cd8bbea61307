#include "ptx/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ptx/error.hpp"
#include "ptx/kernels.hpp"

namespace ptx {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// --- JSON field access with path-qualified errors ---------------------------

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_.empty() ? "<root>" : path_, "expected an object");
  }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) const {
    seen_.insert(key);
    return j_.at(key);
  }
  double num(const std::string& key, double def) const {
    if (!has(key)) return def;
    return as_number(j_.at(key), at(key));
  }
  std::string str(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ParseError(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::int64_t integer(const std::string& key, std::int64_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ParseError(at(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ParseError(at(key), "expected true or false");
    return v.get<bool>();
  }
  // Unknown keys are almost always typos; reject them.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParseError(at(it.key()), "unknown field");
    }
  }
  static double as_number(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return kInf;
      if (s == "-inf") return -kInf;
    }
    throw ParseError(where, "expected a number");
  }

 private:
  const json& j_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

json num_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

Species parse_species(const std::string& s, const std::string& where) {
  auto sp = species_from_string(s);
  if (!sp) throw ParseError(where, "unknown species '" + s + "'");
  return *sp;
}

std::vector<SpeciesRatio> parse_ratios(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where, "expected an object of species ratios");
  std::vector<SpeciesRatio> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out.push_back({parse_species(it.key(), where + "." + it.key()),
                   Obj::as_number(it.value(), where + "." + it.key())});
  }
  return out;
}

json ratios_json(const std::vector<SpeciesRatio>& r) {
  json j = json::object();
  for (const auto& x : r) j[std::string(to_string(x.species))] = x.kg_per_kg;
  return j;
}

PerSpecies<double> parse_per_species(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where, "expected an object keyed by species");
  PerSpecies<double> out{};
  for (auto it = j.begin(); it != j.end(); ++it) {
    out[idx(parse_species(it.key(), where + "." + it.key()))] =
        Obj::as_number(it.value(), where + "." + it.key());
  }
  return out;
}

json per_species_json(const PerSpecies<double>& v) {
  json j = json::object();
  for (Species s : kAllSpecies) {
    if (v[idx(s)] != 0.0) j[std::string(to_string(s))] = num_json(v[idx(s)]);
  }
  return j;
}

ModuleMode parse_mode(const std::string& s, const std::string& where) {
  for (ModuleMode m : {ModuleMode::Off, ModuleMode::Starting, ModuleMode::Running, ModuleMode::Stopping}) {
    if (to_string(m) == s) return m;
  }
  throw ParseError(where, "unknown mode '" + s + "'");
}

ConversionModuleParams parse_module(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string kind_s = o.str("kind", "");
  auto kind = module_kind_from_string(kind_s);
  if (!kind) throw ParseError(o.at("kind"), "expected desalination, electrolysis or synthesis");
  ConversionModuleParams m = default_module(*kind);
  m.name = o.str("name", m.name);
  if (o.has("product")) m.product = parse_species(o.str("product", ""), o.at("product"));
  m.p_max_kw = o.num("p_max_kw", m.p_max_kw);
  m.p_min_frac = o.num("p_min_frac", m.p_min_frac);
  m.ramp_kw_per_min = o.num("ramp_kw_per_min", m.ramp_kw_per_min);
  m.specific_energy_kwh_per_kg = o.num("specific_energy_kwh_per_kg", m.specific_energy_kwh_per_kg);
  m.startup_time_s = o.num("startup_time_s", m.startup_time_s);
  if (o.has("feeds")) m.feeds = parse_ratios(o.raw("feeds"), o.at("feeds"));
  if (o.has("byproducts")) m.byproducts = parse_ratios(o.raw("byproducts"), o.at("byproducts"));
  o.finish();
  return m;
}

StorageParams parse_storage(const json& j, const std::string& path) {
  Obj o(j, path);
  const Species sp = parse_species(o.str("species", ""), o.at("species"));
  StorageParams s;
  s.species = sp;
  s.name = std::string(to_string(sp)) + "_storage";
  for (const auto& d : default_topology().storages) {
    if (d.species == sp) s = d;
  }
  s.name = o.str("name", s.name);
  s.capacity = o.num("capacity", s.capacity);
  s.initial_level = o.num("initial_level", s.initial_level);
  s.min_level = o.num("min_level", s.min_level);
  o.finish();
  return s;
}

std::size_t module_by_name(const PlantTopology& topo, const std::string& name,
                           const std::string& where) {
  auto m = topo.module_index(name);
  if (!m) throw ParseError(where, "unknown module '" + name + "'");
  return *m;
}

std::vector<double> per_storage(const Obj& o, const std::string& key, const PlantTopology& topo,
                                std::vector<double> def) {
  if (!o.has(key)) return def;
  const json& v = o.raw(key);
  if (v.is_number()) return std::vector<double>(topo.storages.size(), v.get<double>());
  if (!v.is_object()) throw ParseError(o.at(key), "expected a number or an object keyed by storage");
  for (auto it = v.begin(); it != v.end(); ++it) {
    bool found = false;
    for (std::size_t k = 0; k < topo.storages.size(); ++k) {
      if (topo.storages[k].name == it.key()) {
        def[k] = Obj::as_number(it.value(), o.at(key) + "." + it.key());
        found = true;
      }
    }
    if (!found) throw ParseError(o.at(key) + "." + it.key(), "unknown storage");
  }
  return def;
}

json per_storage_json(const std::vector<double>& v, const PlantTopology& topo) {
  json j = json::object();
  for (std::size_t k = 0; k < v.size() && k < topo.storages.size(); ++k) {
    j[topo.storages[k].name] = num_json(v[k]);
  }
  return j;
}

}  // namespace

// --------------------------------------------------------------------------

std::vector<ShipCall> periodic_ships(const PlantTopology& topo, double first_s, double period_s,
                                     double duration_s, double horizon_end_s) {
  std::vector<ShipCall> out;
  if (!(period_s > 0.0)) return out;
  for (double t = first_s; t < horizon_end_s; t += period_s) {
    ShipCall c;
    c.arrival_s = t;
    c.duration_s = duration_s;
    c.offtake_kg[idx(Species::Methanol)] = kInf;
    if (auto k = topo.storage_of(Species::CO2)) {
      c.delivery_kg[idx(Species::CO2)] = topo.storages[*k].capacity;
    }
    out.push_back(c);
  }
  return out;
}

WindGeneratorParams preset_generator(const WindGeneratorParams& base, const std::string& preset) {
  WindGeneratorParams p = base;
  if (preset == "low-wind") {
    p.mu *= 0.4;
  } else if (preset == "high-dynamics") {
    p.rho = 0.8;
    p.sigma_inf *= 2.0;
  } else if (!preset.empty()) {
    throw ValidationError("unknown preset '" + preset + "' (expected low-wind or high-dynamics)");
  }
  return p;
}

void apply_preset(Scenario& s, const std::string& preset) {
  s.wind.generator = preset_generator(s.wind.generator, preset);
  if (!preset.empty()) s.wind.kind = WindSourceKind::Synthetic;
  s.preset = preset;
}

void validate(const Scenario& s) {
  require(!s.name.empty(), "scenario.name must not be empty");
  require(s.dt_sim_s > 0.0 && std::isfinite(s.dt_sim_s), "dt_sim_s > 0");
  require(s.resched_interval_s > 0.0, "resched_interval_s > 0");
  require(s.dt_sim_s <= s.resched_interval_s, "dt_sim_s <= resched_interval_s");
  require(s.duration_s >= 0.0 && std::isfinite(s.duration_s), "duration_s >= 0");
  const double ticks = s.duration_s / s.dt_sim_s;
  require(std::abs(ticks - std::round(ticks)) <= 1e-9 * std::max(1.0, ticks),
          "duration_s must be a multiple of dt_sim_s");
  validate(s.topology);
  validate(s.control, s.topology);
  if (s.forecast.climatology) validate(*s.forecast.climatology);
  require(s.forecast.n_scenarios >= 1, "forecast.n_scenarios >= 1");
  require(!s.forecast.quantile_levels.empty(), "forecast.quantile_levels must not be empty");
  for (std::size_t i = 0; i < s.forecast.quantile_levels.size(); ++i) {
    const double q = s.forecast.quantile_levels[i];
    require(q >= 0.0 && q <= 1.0, "forecast.quantile_levels in [0, 1]");
    require(i == 0 || q > s.forecast.quantile_levels[i - 1], "forecast.quantile_levels increasing");
  }
  require(std::find(s.forecast.quantile_levels.begin(), s.forecast.quantile_levels.end(),
                    s.forecast.scheduler_quantile) != s.forecast.quantile_levels.end(),
          "forecast.scheduler_quantile must be one of quantile_levels");
  require(s.scheduler.step_s > 0.0, "scheduler.step_s > 0");
  require(s.scheduler.horizon_steps >= 1, "scheduler.horizon_steps >= 1");
  require(s.scheduler.deviation_ticks >= 1, "scheduler.deviation_ticks >= 1");
  require(s.scheduler.deviation_refractory_s >= 0.0, "scheduler.deviation_refractory_s >= 0");
  const auto& lt = s.scheduler.weights.lambda_terminal;
  require(lt.empty() || lt.size() == s.topology.storages.size(),
          "scheduler.lambda_terminal: one weight per storage");
  require(s.scheduler.weights.lambda_curtail >= 0 && s.scheduler.weights.lambda_offtake >= 0 &&
              s.scheduler.weights.lambda_shortfall >= 0,
          "scheduler weights >= 0");
  const auto& g = s.wind.generator;
  switch (s.wind.kind) {
    case WindSourceKind::Synthetic:
      require(g.sigma_inf >= 0 && g.rho >= 0 && g.rho <= 1 && g.step_s > 0 && g.mu >= 0,
              "wind generator: sigma_inf >= 0, 0 <= rho <= 1, step_s > 0, mu >= 0");
      break;
    case WindSourceKind::Trace:
      require(!s.wind.trace.empty(), "wind trace must contain at least one sample");
      break;
    case WindSourceKind::Constant:
      require(s.wind.constant_mps >= 0.0, "wind.constant_mps >= 0");
      break;
  }
  for (std::size_t i = 0; i < s.ships.size(); ++i) {
    const auto& c = s.ships[i];
    require(c.arrival_s >= 0 && c.duration_s > 0, "ships: arrival_s >= 0 and duration_s > 0");
    for (Species sp : kAllSpecies) {
      require(c.offtake_kg[idx(sp)] >= 0 && c.delivery_kg[idx(sp)] >= 0, "ships: capacities >= 0");
    }
    if (i > 0) {
      const auto& p = s.ships[i - 1];
      require(c.arrival_s >= p.arrival_s + p.duration_s, "ships must be sorted and not overlap");
    }
  }
  for (const auto& m : s.maintenance) {
    require(s.topology.module_index(m.module).has_value(), "maintenance: unknown module '" + m.module + "'");
    require(m.start_s <= m.end_s, "maintenance: start_s <= end_s");
  }
  std::set<std::string> seen;
  for (const auto& im : s.initial_modules) {
    auto m = s.topology.module_index(im.module);
    require(m.has_value(), "initial_modules: unknown module '" + im.module + "'");
    require(seen.insert(im.module).second, "initial_modules: module listed twice");
    const auto& p = s.topology.modules[*m];
    if (im.mode == ModuleMode::Running) {
      require(im.load_kw >= p.p_min_kw() && im.load_kw <= p.p_max_kw,
              "initial_modules: running load must lie in [p_min, p_max]");
    } else {
      require(im.load_kw == 0.0, "initial_modules: load must be 0 unless running");
    }
  }
  require(s.teleop.port >= 0 && s.teleop.port <= 65535, "teleop.port in [0, 65535]");
}

Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  Obj o(j, "");
  Scenario s;
  s.name = o.str("name", s.name);
  s.seed = static_cast<std::uint64_t>(o.integer("seed", 1));
  s.duration_s = o.num("duration_s", s.duration_s);
  s.dt_sim_s = o.num("dt_sim_s", s.dt_sim_s);
  s.resched_interval_s = o.num("resched_interval_s", s.resched_interval_s);
  const std::string preset = o.str("preset", "");
  s.preset = o.str("preset_applied", "");

  if (o.has("turbine")) {
    Obj t(o.raw("turbine"), "turbine");
    auto& tp = s.topology.turbine;
    tp.count = static_cast<int>(t.integer("count", tp.count));
    tp.rated_power_kw = t.num("rated_power_kw", tp.rated_power_kw);
    tp.cut_in_mps = t.num("cut_in_mps", tp.cut_in_mps);
    tp.rated_speed_mps = t.num("rated_speed_mps", tp.rated_speed_mps);
    tp.cut_out_mps = t.num("cut_out_mps", tp.cut_out_mps);
    t.finish();
  }
  if (o.has("modules")) {
    const json& arr = o.raw("modules");
    if (!arr.is_array()) throw ParseError("modules", "expected an array");
    s.topology.modules.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      s.topology.modules.push_back(parse_module(arr[i], "modules[" + std::to_string(i) + "]"));
    }
  }
  if (o.has("storages")) {
    const json& arr = o.raw("storages");
    if (!arr.is_array()) throw ParseError("storages", "expected an array");
    s.topology.storages.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      s.topology.storages.push_back(parse_storage(arr[i], "storages[" + std::to_string(i) + "]"));
    }
  }
  validate(s.topology);

  if (o.has("initial_modules")) {
    const json& arr = o.raw("initial_modules");
    if (!arr.is_array()) throw ParseError("initial_modules", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj m(arr[i], "initial_modules[" + std::to_string(i) + "]");
      InitialModuleState im;
      im.module = m.str("module", "");
      im.mode = parse_mode(m.str("mode", "off"), m.at("mode"));
      im.load_kw = m.num("load_kw", 0.0);
      m.finish();
      s.initial_modules.push_back(im);
    }
  }

  s.control = default_control_config(s.topology);
  s.control.staleness_horizon_s = 2.0 * s.resched_interval_s;
  if (o.has("control")) {
    Obj c(o.raw("control"), "control");
    if (c.has("shed_priority")) {
      const json& arr = c.raw("shed_priority");
      if (!arr.is_array()) throw ParseError(c.at("shed_priority"), "expected an array of module names");
      s.control.shed_priority.clear();
      for (const auto& n : arr) {
        if (!n.is_string()) throw ParseError(c.at("shed_priority"), "expected module names");
        s.control.shed_priority.push_back(
            module_by_name(s.topology, n.get<std::string>(), c.at("shed_priority")));
      }
    }
    s.control.low_watermark = per_storage(c, "low_watermark", s.topology, s.control.low_watermark);
    s.control.high_watermark = per_storage(c, "high_watermark", s.topology, s.control.high_watermark);
    s.control.staleness_horizon_s = c.num("staleness_horizon_s", s.control.staleness_horizon_s);
    s.control.shortfall_band = c.num("shortfall_band", s.control.shortfall_band);
    s.control.deviation_band = c.num("deviation_band", s.control.deviation_band);
    s.control.deviation_floor_frac = c.num("deviation_floor_frac", s.control.deviation_floor_frac);
    s.control.alarm_clear_delay_s = c.num("alarm_clear_delay_s", s.control.alarm_clear_delay_s);
    c.finish();
  }

  if (o.has("wind")) {
    Obj w(o.raw("wind"), "wind");
    const std::string src = w.str("source", "synthetic");
    auto& g = s.wind.generator;
    g.mu = w.num("mu", g.mu);
    g.sigma_inf = w.num("sigma_inf", g.sigma_inf);
    g.rho = w.num("rho", g.rho);
    g.step_s = w.num("step_s", g.step_s);
    if (w.has("v0")) g.v0 = w.num("v0", 0.0);
    s.wind.constant_mps = w.num("constant_mps", 0.0);
    s.wind.trace_path = w.str("trace_path", "");
    if (src == "synthetic") {
      s.wind.kind = WindSourceKind::Synthetic;
    } else if (src == "constant") {
      s.wind.kind = WindSourceKind::Constant;
    } else if (src == "trace") {
      s.wind.kind = WindSourceKind::Trace;
      if (s.wind.trace_path.empty()) throw ParseError(w.at("trace_path"), "required for a trace source");
      std::filesystem::path p(s.wind.trace_path);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      if (!std::filesystem::exists(p)) {
        throw ValidationError("wind.trace_path: file '" + p.string() + "' does not exist");
      }
      s.wind.trace = load_wind_trace_csv(p.string());
    } else {
      throw ParseError(w.at("source"), "expected synthetic, trace or constant");
    }
    w.finish();
  }

  if (o.has("forecast")) {
    Obj f(o.raw("forecast"), "forecast");
    if (f.has("climatology")) {
      Obj c(f.raw("climatology"), "forecast.climatology");
      ClimatologyParams cp;
      cp.mu = c.num("mu", cp.mu);
      cp.sigma_inf = c.num("sigma_inf", cp.sigma_inf);
      cp.rho = c.num("rho", cp.rho);
      c.finish();
      s.forecast.climatology = cp;
    }
    const auto n = f.integer("n_scenarios", static_cast<std::int64_t>(s.forecast.n_scenarios));
    if (n < 1) throw ValidationError("forecast.n_scenarios >= 1");
    s.forecast.n_scenarios = static_cast<std::size_t>(n);
    if (f.has("quantile_levels")) {
      const json& arr = f.raw("quantile_levels");
      if (!arr.is_array()) throw ParseError(f.at("quantile_levels"), "expected an array");
      s.forecast.quantile_levels.clear();
      for (const auto& v : arr) s.forecast.quantile_levels.push_back(Obj::as_number(v, f.at("quantile_levels")));
    }
    s.forecast.scheduler_quantile = f.num("scheduler_quantile", s.forecast.scheduler_quantile);
    f.finish();
  }

  if (o.has("scheduler")) {
    Obj c(o.raw("scheduler"), "scheduler");
    s.scheduler.step_s = c.num("step_s", s.scheduler.step_s);
    const auto h = c.integer("horizon_steps", static_cast<std::int64_t>(s.scheduler.horizon_steps));
    if (h < 1) throw ValidationError("scheduler.horizon_steps >= 1");
    s.scheduler.horizon_steps = static_cast<std::size_t>(h);
    auto& w = s.scheduler.weights;
    w.lambda_curtail = c.num("lambda_curtail", w.lambda_curtail);
    w.lambda_offtake = c.num("lambda_offtake", w.lambda_offtake);
    w.lambda_shortfall = c.num("lambda_shortfall", w.lambda_shortfall);
    if (c.has("lambda_terminal")) {
      ScheduleProblem tmp;
      tmp.topology = s.topology;
      w.lambda_terminal = per_storage(c, "lambda_terminal", s.topology, terminal_weights(tmp));
    }
    s.scheduler.deviation_ticks = static_cast<int>(c.integer("deviation_ticks", s.scheduler.deviation_ticks));
    s.scheduler.deviation_refractory_s = c.num("deviation_refractory_s", s.scheduler.deviation_refractory_s);
    c.finish();
  }

  if (o.has("ships") && o.has("ship_schedule")) {
    throw ParseError("ships", "give either ships or ship_schedule, not both");
  }
  if (o.has("ships")) {
    const json& arr = o.raw("ships");
    if (!arr.is_array()) throw ParseError("ships", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj c(arr[i], "ships[" + std::to_string(i) + "]");
      ShipCall call;
      call.arrival_s = c.num("arrival_s", 0.0);
      call.duration_s = c.num("duration_s", 4 * 3600.0);
      if (c.has("offtake")) call.offtake_kg = parse_per_species(c.raw("offtake"), c.at("offtake"));
      if (c.has("delivery")) call.delivery_kg = parse_per_species(c.raw("delivery"), c.at("delivery"));
      c.finish();
      s.ships.push_back(call);
    }
  } else {
    double first = 72 * 3600.0, period = 72 * 3600.0, dur = 4 * 3600.0;
    if (o.has("ship_schedule")) {
      Obj c(o.raw("ship_schedule"), "ship_schedule");
      first = c.num("first_arrival_s", first);
      period = c.num("period_s", period);
      dur = c.num("duration_s", dur);
      c.finish();
    }
    s.ships = periodic_ships(s.topology, first, period, dur, s.duration_s);
  }

  if (o.has("maintenance")) {
    const json& arr = o.raw("maintenance");
    if (!arr.is_array()) throw ParseError("maintenance", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj c(arr[i], "maintenance[" + std::to_string(i) + "]");
      MaintenanceItem m;
      m.module = c.str("module", "");
      m.start_s = c.num("start_s", 0.0);
      m.end_s = c.num("end_s", 0.0);
      c.finish();
      s.maintenance.push_back(m);
    }
  }
  if (o.has("production_goal_kg")) s.production_goal_kg = o.num("production_goal_kg", 0.0);
  if (o.has("teleop")) {
    Obj t(o.raw("teleop"), "teleop");
    s.teleop.host = t.str("host", s.teleop.host);
    s.teleop.port = static_cast<int>(t.integer("port", s.teleop.port));
    s.teleop.speed = t.num("speed", s.teleop.speed);
    t.finish();
  }
  o.finish();
  if (!preset.empty()) apply_preset(s, preset);
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto > 0 ? upto - 1 : 0), '\n');
    throw ParseError(path + ":" + std::to_string(line), "invalid JSON");
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return scenario_from_json(j, dir.empty() ? "." : dir.string());
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["dt_sim_s"] = s.dt_sim_s;
  j["resched_interval_s"] = s.resched_interval_s;
  // The generator parameters below already include the preset; echo it under a
  // separate key so re-loading the echo does not apply it twice.
  j["preset"] = "";
  j["preset_applied"] = s.preset;
  const auto& t = s.topology.turbine;
  j["turbine"] = {{"count", t.count},
                  {"rated_power_kw", t.rated_power_kw},
                  {"cut_in_mps", t.cut_in_mps},
                  {"rated_speed_mps", t.rated_speed_mps},
                  {"cut_out_mps", t.cut_out_mps}};
  j["modules"] = json::array();
  for (const auto& m : s.topology.modules) {
    j["modules"].push_back({{"name", m.name},
                            {"kind", std::string(to_string(m.kind))},
                            {"product", std::string(to_string(m.product))},
                            {"p_max_kw", m.p_max_kw},
                            {"p_min_frac", m.p_min_frac},
                            {"ramp_kw_per_min", m.ramp_kw_per_min},
                            {"specific_energy_kwh_per_kg", m.specific_energy_kwh_per_kg},
                            {"startup_time_s", m.startup_time_s},
                            {"feeds", ratios_json(m.feeds)},
                            {"byproducts", ratios_json(m.byproducts)}});
  }
  j["storages"] = json::array();
  for (const auto& st : s.topology.storages) {
    j["storages"].push_back({{"name", st.name},
                             {"species", std::string(to_string(st.species))},
                             {"capacity", st.capacity},
                             {"initial_level", st.initial_level},
                             {"min_level", st.min_level}});
  }
  j["initial_modules"] = json::array();
  for (const auto& im : s.initial_modules) {
    j["initial_modules"].push_back(
        {{"module", im.module}, {"mode", std::string(to_string(im.mode))}, {"load_kw", im.load_kw}});
  }
  json shed = json::array();
  for (auto m : s.control.shed_priority) shed.push_back(s.topology.modules[m].name);
  j["control"] = {{"shed_priority", shed},
                  {"low_watermark", per_storage_json(s.control.low_watermark, s.topology)},
                  {"high_watermark", per_storage_json(s.control.high_watermark, s.topology)},
                  {"staleness_horizon_s", s.control.staleness_horizon_s},
                  {"shortfall_band", s.control.shortfall_band},
                  {"deviation_band", s.control.deviation_band},
                  {"deviation_floor_frac", s.control.deviation_floor_frac},
                  {"alarm_clear_delay_s", s.control.alarm_clear_delay_s}};
  json wind;
  switch (s.wind.kind) {
    case WindSourceKind::Synthetic: wind["source"] = "synthetic"; break;
    case WindSourceKind::Trace: wind["source"] = "trace"; break;
    case WindSourceKind::Constant: wind["source"] = "constant"; break;
  }
  wind["mu"] = s.wind.generator.mu;
  wind["sigma_inf"] = s.wind.generator.sigma_inf;
  wind["rho"] = s.wind.generator.rho;
  wind["step_s"] = s.wind.generator.step_s;
  wind["v0"] = s.wind.generator.v0 ? json(*s.wind.generator.v0) : json(nullptr);
  wind["constant_mps"] = s.wind.constant_mps;
  wind["trace_path"] = s.wind.trace_path;
  j["wind"] = wind;
  json fc;
  fc["climatology"] = s.forecast.climatology
                          ? json{{"mu", s.forecast.climatology->mu},
                                 {"sigma_inf", s.forecast.climatology->sigma_inf},
                                 {"rho", s.forecast.climatology->rho}}
                          : json(nullptr);
  fc["n_scenarios"] = s.forecast.n_scenarios;
  fc["quantile_levels"] = s.forecast.quantile_levels;
  fc["scheduler_quantile"] = s.forecast.scheduler_quantile;
  j["forecast"] = fc;
  ScheduleProblem tmp;
  tmp.topology = s.topology;
  tmp.weights = s.scheduler.weights;
  j["scheduler"] = {{"step_s", s.scheduler.step_s},
                    {"horizon_steps", s.scheduler.horizon_steps},
                    {"lambda_curtail", s.scheduler.weights.lambda_curtail},
                    {"lambda_terminal", per_storage_json(terminal_weights(tmp), s.topology)},
                    {"lambda_offtake", s.scheduler.weights.lambda_offtake},
                    {"lambda_shortfall", s.scheduler.weights.lambda_shortfall},
                    {"deviation_ticks", s.scheduler.deviation_ticks},
                    {"deviation_refractory_s", s.scheduler.deviation_refractory_s}};
  j["ships"] = json::array();
  for (const auto& c : s.ships) {
    j["ships"].push_back({{"arrival_s", c.arrival_s},
                          {"duration_s", c.duration_s},
                          {"offtake", per_species_json(c.offtake_kg)},
                          {"delivery", per_species_json(c.delivery_kg)}});
  }
  j["maintenance"] = json::array();
  for (const auto& m : s.maintenance) {
    j["maintenance"].push_back({{"module", m.module}, {"start_s", m.start_s}, {"end_s", m.end_s}});
  }
  j["production_goal_kg"] = s.production_goal_kg ? json(*s.production_goal_kg) : json(nullptr);
  j["teleop"] = {{"host", s.teleop.host}, {"port", s.teleop.port}, {"speed", s.teleop.speed}};
  return j;
}

std::vector<WindTracePoint> parse_wind_trace_csv(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  std::string line;
  std::vector<WindTracePoint> out;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "time_s,wind_mps") {
        throw ParseError(where + ":" + std::to_string(lineno), "expected header time_s,wind_mps");
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(where + ":" + std::to_string(lineno), "expected two columns");
    }
    WindTracePoint p;
    try {
      std::size_t a = 0, b = 0;
      p.time_s = std::stod(line.substr(0, comma), &a);
      p.wind_mps = std::stod(line.substr(comma + 1), &b);
      if (a != comma || b != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(where + ":" + std::to_string(lineno), "bad number");
    }
    if (!(p.wind_mps >= 0.0)) {
      throw ParseError(where + ":" + std::to_string(lineno), "wind_mps must be >= 0");
    }
    if (!out.empty() && !(p.time_s > out.back().time_s)) {
      throw ParseError(where + ":" + std::to_string(lineno), "time_s must be strictly increasing");
    }
    out.push_back(p);
  }
  if (!header) throw ParseError(where, "empty wind trace");
  return out;
}

std::vector<WindTracePoint> load_wind_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wind trace '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_wind_trace_csv(buf.str(), path);
}

// --------------------------------------------------------------------------

WindGenerator::WindGenerator(const WindGeneratorParams& p, std::uint64_t seed, double t0,
                             std::optional<double> v_start)
    : kind_(WindSourceKind::Synthetic), p_(p), rng_(kernels::stream_seed(seed, 0x77696e64)), t0_(t0) {
  knots_.push_back(v_start ? *v_start : (p.v0 ? *p.v0 : p.mu));
}

WindGenerator WindGenerator::constant(double v) {
  WindGenerator g;
  g.kind_ = WindSourceKind::Constant;
  g.constant_ = v;
  return g;
}

WindGenerator WindGenerator::from_trace(std::vector<WindTracePoint> trace) {
  WindGenerator g;
  g.kind_ = WindSourceKind::Trace;
  g.trace_ = std::move(trace);
  return g;
}

double WindGenerator::at(double t) {
  switch (kind_) {
    case WindSourceKind::Constant:
      return constant_;
    case WindSourceKind::Trace: {
      if (trace_.empty()) return 0.0;
      if (t <= trace_.front().time_s) return trace_.front().wind_mps;
      if (t >= trace_.back().time_s) return trace_.back().wind_mps;
      auto it = std::upper_bound(trace_.begin(), trace_.end(), t,
                                 [](double x, const WindTracePoint& p) { return x < p.time_s; });
      const auto& b = *it;
      const auto& a = *std::prev(it);
      const double w = (t - a.time_s) / (b.time_s - a.time_s);
      return a.wind_mps + w * (b.wind_mps - a.wind_mps);
    }
    case WindSourceKind::Synthetic: {
      const double x = std::max(0.0, (t - t0_) / p_.step_s);
      const auto k = static_cast<std::size_t>(std::floor(x));
      const double innov = p_.sigma_inf * std::sqrt(std::max(0.0, 1.0 - p_.rho * p_.rho));
      while (knots_.size() < k + 2) {
        const double prev = knots_.back();
        knots_.push_back(p_.mu + p_.rho * (prev - p_.mu) + innov * normal_(rng_));
      }
      const double w = x - static_cast<double>(k);
      const double v = knots_[k] + w * (knots_[k + 1] - knots_[k]);
      return std::max(0.0, v);
    }
  }
  return 0.0;
}

WindGenerator make_wind_generator(const Scenario& s) {
  switch (s.wind.kind) {
    case WindSourceKind::Constant: return WindGenerator::constant(s.wind.constant_mps);
    case WindSourceKind::Trace: return WindGenerator::from_trace(s.wind.trace);
    case WindSourceKind::Synthetic: break;
  }
  return WindGenerator(s.wind.generator, s.seed);
}

Scenario random_scenario(std::uint64_t seed, double duration_s) {
  std::mt19937_64 rng(kernels::stream_seed(seed, 0x5ce7));
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  Scenario s;
  s.name = "random-" + std::to_string(seed);
  s.seed = seed;
  s.duration_s = duration_s;
  auto& topo = s.topology;
  topo.turbine.count = static_cast<int>(std::uniform_int_distribution<int>(1, 6)(rng));
  for (auto& m : topo.modules) {
    m.p_max_kw *= uni(0.5, 1.5);
    m.ramp_kw_per_min *= uni(0.5, 1.5);
  }
  for (auto& st : topo.storages) {
    st.capacity *= uni(0.5, 2.0);
    st.min_level = 0.0;
    st.initial_level = uni(0.0, 1.0) * st.capacity;
  }
  s.control = default_control_config(topo);
  s.control.staleness_horizon_s = 2.0 * s.resched_interval_s;
  s.wind.generator.mu = uni(4.0, 14.0);
  s.wind.generator.sigma_inf = uni(1.0, 5.0);
  s.wind.generator.rho = uni(0.8, 0.99);
  s.wind.generator.v0 = uni(0.0, 20.0);
  const double period = uni(12.0, 72.0) * 3600.0;
  s.ships = periodic_ships(topo, uni(2.0, period / 3600.0) * 3600.0, period, 4 * 3600.0, duration_s);
  validate(s);
  return s;
}

}  // namespace ptx
