#include "ptx/plant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include "ptx/error.hpp"

namespace ptx {

namespace {

// Molar masses, g/mol.
constexpr double kMolarH2 = 2.016;
constexpr double kMolarCO2 = 44.009;
constexpr double kMolarMeOH = 32.042;
constexpr double kMolarO2 = 31.998;

int kind_rank(ModuleKind k) { return static_cast<int>(k); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace

std::string_view to_string(ModuleKind k) {
  switch (k) {
    case ModuleKind::Desalination: return "desalination";
    case ModuleKind::Electrolysis: return "electrolysis";
    case ModuleKind::Synthesis: return "synthesis";
  }
  return "?";
}

std::optional<ModuleKind> module_kind_from_string(std::string_view name) {
  for (auto k : {ModuleKind::Desalination, ModuleKind::Electrolysis, ModuleKind::Synthesis}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(ModuleMode m) {
  switch (m) {
    case ModuleMode::Off: return "off";
    case ModuleMode::Starting: return "starting";
    case ModuleMode::Running: return "running";
    case ModuleMode::Stopping: return "stopping";
  }
  return "?";
}

double ConversionModuleParams::feed_ratio(Species s) const {
  for (const auto& f : feeds) {
    if (f.species == s) return f.kg_per_kg;
  }
  return 0.0;
}

double ConversionModuleParams::byproduct_ratio(Species s) const {
  for (const auto& b : byproducts) {
    if (b.species == s) return b.kg_per_kg;
  }
  return 0.0;
}

std::optional<std::size_t> PlantTopology::storage_of(Species s) const {
  for (std::size_t i = 0; i < storages.size(); ++i) {
    if (storages[i].species == s) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> PlantTopology::module_index(std::string_view name) const {
  for (std::size_t i = 0; i < modules.size(); ++i) {
    if (modules[i].name == name) return i;
  }
  return std::nullopt;
}

void validate(const TurbineParams& t) {
  require(t.count >= 1, "turbine.count >= 1");
  require(t.rated_power_kw > 0, "turbine.rated_power_kw > 0");
  require(0 < t.cut_in_mps && t.cut_in_mps < t.rated_speed_mps &&
              t.rated_speed_mps < t.cut_out_mps,
          "turbine: 0 < cut_in < rated_speed < cut_out");
}

void validate(const ConversionModuleParams& m) {
  const std::string who = "module '" + m.name + "': ";
  require(!m.name.empty(), "module name must not be empty");
  require(m.p_max_kw > 0, who + "p_max > 0");
  require(m.p_min_frac >= 0 && m.p_min_frac < 1, who + "p_min_frac in [0,1)");
  require(m.ramp_kw_per_min > 0, who + "ramp_limit > 0");
  require(m.specific_energy_kwh_per_kg > 0, who + "specific_energy > 0");
  require(m.startup_time_s >= 0, who + "startup_time >= 0");
  for (const auto& f : m.feeds) require(f.kg_per_kg >= 0, who + "feed ratios >= 0");
  for (const auto& b : m.byproducts) require(b.kg_per_kg >= 0, who + "byproduct ratios >= 0");
}

void validate(const StorageParams& s) {
  const std::string who = "storage '" + s.name + "': ";
  require(!s.name.empty(), "storage name must not be empty");
  require(0 <= s.min_level && s.min_level <= s.initial_level && s.initial_level <= s.capacity,
          who + "0 <= min_level <= initial_level <= capacity");
}

void validate(const PlantTopology& topo) {
  validate(topo.turbine);
  std::set<std::string> names;
  for (const auto& m : topo.modules) {
    validate(m);
    require(names.insert(m.name).second, "duplicate name '" + m.name + "'");
  }
  std::set<Species> stored;
  for (const auto& s : topo.storages) {
    validate(s);
    require(names.insert(s.name).second, "duplicate name '" + s.name + "'");
    require(stored.insert(s.species).second,
            "species '" + std::string(to_string(s.species)) + "' has more than one storage");
  }
  int last_rank = -1;
  for (const auto& m : topo.modules) {
    require(kind_rank(m.kind) >= last_rank,
            "module chain must follow desalination -> electrolysis -> synthesis order");
    last_rank = kind_rank(m.kind);
    require(stored.count(m.product) == 1,
            "module '" + m.name + "': product species has no downstream storage");
    for (const auto& f : m.feeds) {
      if (f.kg_per_kg > 0) {
        require(stored.count(f.species) == 1, "module '" + m.name + "': feed species '" +
                                                  std::string(to_string(f.species)) +
                                                  "' has no upstream storage");
      }
    }
  }
}

ConversionModuleParams default_module(ModuleKind kind) {
  ConversionModuleParams m;
  m.kind = kind;
  switch (kind) {
    case ModuleKind::Desalination:
      // Seawater intake is unlimited and not modelled as a storage.
      m.name = "desalination";
      m.product = Species::Water;
      m.p_max_kw = 100.0;
      m.p_min_frac = 0.2;
      m.ramp_kw_per_min = 20.0;
      m.specific_energy_kwh_per_kg = 0.004;
      m.startup_time_s = 120.0;
      break;
    case ModuleKind::Electrolysis:
      m.name = "electrolysis";
      m.product = Species::Hydrogen;
      m.p_max_kw = 50000.0;
      m.p_min_frac = 0.1;
      m.ramp_kw_per_min = 5000.0;
      m.specific_energy_kwh_per_kg = 50.0;
      m.startup_time_s = 300.0;
      // Stoichiometric 8.94 kg/kg plus purge allowance.
      m.feeds = {{Species::Water, 10.0}};
      // 2 H2O -> 2 H2 + O2: 0.5 * M(O2) / M(H2) = 7.94 kg O2 per kg H2.
      m.byproducts = {{Species::Oxygen, 0.5 * kMolarO2 / kMolarH2}};
      break;
    case ModuleKind::Synthesis:
      // CO2 + 3 H2 -> CH3OH + H2O
      m.name = "synthesis";
      m.product = Species::Methanol;
      m.p_max_kw = 5000.0;
      m.p_min_frac = 0.2;
      m.ramp_kw_per_min = 50.0;
      m.specific_energy_kwh_per_kg = 1.0;
      m.startup_time_s = 1800.0;
      m.feeds = {{Species::Hydrogen, 3.0 * kMolarH2 / kMolarMeOH},
                 {Species::CO2, kMolarCO2 / kMolarMeOH}};
      break;
  }
  return m;
}

PlantTopology default_topology() {
  PlantTopology t;
  t.modules = {default_module(ModuleKind::Desalination),
               default_module(ModuleKind::Electrolysis),
               default_module(ModuleKind::Synthesis)};
  t.storages = {
      {"water_tank", Species::Water, 50000.0, 25000.0, 0.0},
      {"hydrogen_tank", Species::Hydrogen, 5000.0, 2500.0, 0.0},
      {"co2_tank", Species::CO2, 600000.0, 600000.0, 0.0},
      {"methanol_tank", Species::Methanol, 500000.0, 0.0, 0.0},
  };
  return t;
}

PlantState initial_state(const PlantTopology& topo) {
  PlantState s;
  s.modules.assign(topo.modules.size(), ModuleState{});
  s.levels.reserve(topo.storages.size());
  for (const auto& st : topo.storages) s.levels.push_back(st.initial_level);
  s.last_flows.module_energy_kwh.assign(topo.modules.size(), 0.0);
  s.last_flows.module_production_kg.assign(topo.modules.size(), 0.0);
  return s;
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void num(double d) { bytes(&d, sizeof d); }
  template <class A>
  void all(const A& a) {
    for (double d : a) num(d);
  }
};

}  // namespace

std::uint64_t state_hash(const PlantState& s) {
  Fnv f;
  f.num(s.sim_time_s);
  f.num(s.wind_mps);
  for (const auto& m : s.modules) {
    auto mode = static_cast<std::uint8_t>(m.mode);
    f.bytes(&mode, 1);
    f.num(m.startup_remaining_s);
    f.num(m.load_kw);
    f.num(m.commanded_kw);
  }
  f.all(s.levels);
  f.all(s.last_flows.produced);
  f.all(s.last_flows.consumed);
  f.all(s.last_flows.offtake);
  f.all(s.last_flows.delivered);
  f.all(s.last_flows.vented);
  f.all(s.last_flows.module_energy_kwh);
  f.all(s.last_flows.module_production_kg);
  f.num(s.available_power_kw);
  f.num(s.curtailed_power_kw);
  return f.h;
}

double power_curve(double v, const TurbineParams& t) {
  if (v < t.cut_in_mps || v >= t.cut_out_mps) return 0.0;
  const double ci3 = t.cut_in_mps * t.cut_in_mps * t.cut_in_mps;
  const double vr3 = t.rated_speed_mps * t.rated_speed_mps * t.rated_speed_mps;
  const double frac = std::clamp((v * v * v - ci3) / (vr3 - ci3), 0.0, 1.0);
  return t.count * t.rated_power_kw * frac;
}

LoadBand command_band(const ConversionModuleParams& p, const ModuleState& s, double dt_s) {
  const double pmin = p.p_min_kw();
  const double r = p.ramp_per_step_kw(dt_s);
  if (s.mode == ModuleMode::Running) {
    return {std::max(pmin, s.load_kw - r), std::min(p.p_max_kw, s.load_kw + r)};
  }
  return {pmin, std::max(pmin, std::min(p.p_max_kw, r))};
}

ModuleState advance_mode(const ConversionModuleParams& p, const ModuleState& s,
                         double command_kw, double dt_s) {
  ModuleState n = s;
  n.commanded_kw = command_kw;
  const double pmin = p.p_min_kw();
  const auto enter_running = [&] {
    const LoadBand b = command_band(p, ModuleState{}, dt_s);
    n.mode = ModuleMode::Running;
    n.startup_remaining_s = 0.0;
    n.load_kw = std::clamp(command_kw, b.lo, b.hi);
  };
  switch (s.mode) {
    case ModuleMode::Off:
      n.load_kw = 0.0;
      if (command_kw > 0.0) {
        if (p.startup_time_s <= 0.0) {
          enter_running();
        } else {
          // this tick already counts toward the startup time
          n.mode = ModuleMode::Starting;
          n.startup_remaining_s = p.startup_time_s - dt_s;
          if (n.startup_remaining_s <= 0.0) enter_running();
        }
      }
      break;
    case ModuleMode::Starting:
      n.load_kw = 0.0;
      if (command_kw <= 0.0) {
        n.mode = ModuleMode::Off;
        n.startup_remaining_s = 0.0;
      } else {
        n.startup_remaining_s = s.startup_remaining_s - dt_s;
        if (n.startup_remaining_s <= 0.0) enter_running();
      }
      break;
    case ModuleMode::Running:
      if (command_kw <= 0.0 || command_kw < pmin) {
        n.mode = ModuleMode::Stopping;
        n.load_kw = 0.0;
      } else {
        const LoadBand b = command_band(p, s, dt_s);
        n.load_kw = std::clamp(command_kw, b.lo, b.hi);
      }
      break;
    case ModuleMode::Stopping:
      n.mode = ModuleMode::Off;
      n.load_kw = 0.0;
      break;
  }
  return n;
}

ModuleStepResult step_module(const ConversionModuleParams& p, const ModuleState& s,
                             double command_kw, const PerSpecies<double>& feed_available,
                             const PerSpecies<double>& headroom, double dt_s) {
  if (!(dt_s > 0.0)) throw ContractViolation("step_module: dt must be > 0");
  if (!(command_kw >= 0.0)) throw ContractViolation("step_module: command must be >= 0");

  ModuleStepResult r;
  r.state = advance_mode(p, s, command_kw, dt_s);
  if (r.state.mode != ModuleMode::Running) return r;

  // kg of product per kW of load over this tick
  const double kg_per_kw = dt_s / 3600.0 / p.specific_energy_kwh_per_kg;
  double feasible = r.state.load_kw;
  for (const auto& f : p.feeds) {
    if (f.kg_per_kg > 0.0) {
      feasible = std::min(feasible, feed_available[idx(f.species)] / (f.kg_per_kg * kg_per_kw));
    }
  }
  feasible = std::min(feasible, headroom[idx(p.product)] / kg_per_kw);
  for (const auto& b : p.byproducts) {
    if (b.kg_per_kg > 0.0) {
      feasible = std::min(feasible, headroom[idx(b.species)] / (b.kg_per_kg * kg_per_kw));
    }
  }
  if (feasible < r.state.load_kw) {
    r.derated = true;
    if (feasible >= p.p_min_kw() && feasible > 0.0) {
      r.state.load_kw = feasible;
    } else if (p.p_min_kw() <= 0.0) {
      r.state.load_kw = std::max(0.0, feasible);
    } else {
      // cannot hold minimum load: trip
      r.state.mode = ModuleMode::Stopping;
      r.state.load_kw = 0.0;
      return r;
    }
  }

  r.energy_kwh = r.state.load_kw * dt_s / 3600.0;
  r.production_kg = std::min(r.state.load_kw * kg_per_kw, headroom[idx(p.product)]);
  for (const auto& f : p.feeds) {
    r.consumption_kg[idx(f.species)] =
        std::min(f.kg_per_kg * r.production_kg, feed_available[idx(f.species)]);
  }
  for (const auto& b : p.byproducts) {
    r.byproduct_kg[idx(b.species)] =
        std::min(b.kg_per_kg * r.production_kg, headroom[idx(b.species)]);
  }
  return r;
}

double deliverable_power(const PlantTopology& topo, const PlantState& state, double v_mps,
                         double dt_s) {
  double p = power_curve(v_mps, topo.turbine);
  if (auto b = topo.storage_of(Species::Electricity)) {
    p += state.levels[*b] * 3600.0 / dt_s;
  }
  return p;
}

PlantStepResult step_plant(const PlantTopology& topo, const PlantState& state,
                           std::span<const double> commands_kw, const ShipOrder& order,
                           double v_mps, double dt_s) {
  if (!(dt_s > 0.0)) throw ContractViolation("step_plant: dt must be > 0");
  if (commands_kw.size() != topo.modules.size()) {
    throw ContractViolation("step_plant: one command per module required");
  }
  const std::size_t nm = topo.modules.size();
  const double available = power_curve(v_mps, topo.turbine);
  const double deliverable = deliverable_power(topo, state, v_mps, dt_s);

  double planned = 0.0;
  for (std::size_t m = 0; m < nm; ++m) {
    if (!(commands_kw[m] >= 0.0)) throw ContractViolation("step_plant: command must be >= 0");
    planned += advance_mode(topo.modules[m], state.modules[m], commands_kw[m], dt_s).load_kw;
  }
  if (planned > deliverable + 1e-9 * std::max(1.0, deliverable)) {
    throw PowerInfeasible("step_plant: planned load " + std::to_string(planned) +
                          " kW exceeds deliverable power " + std::to_string(deliverable) +
                          " kW at t=" + std::to_string(state.sim_time_s));
  }

  PlantStepResult out;
  PlantState& ns = out.state;
  ns = state;
  FlowSet& fl = out.flows;
  fl.module_energy_kwh.assign(nm, 0.0);
  fl.module_production_kg.assign(nm, 0.0);

  const std::size_t ns_count = topo.storages.size();
  // Ship transfers happen at the start of the tick.
  for (std::size_t k = 0; k < ns_count; ++k) {
    const std::size_t sp = idx(topo.storages[k].species);
    const double off = std::clamp(order.offtake[sp], 0.0, ns.levels[k]);
    ns.levels[k] -= off;
    fl.offtake[sp] += off;
    const double del =
        std::clamp(order.delivery[sp], 0.0, topo.storages[k].capacity - ns.levels[k]);
    ns.levels[k] += del;
    fl.delivered[sp] += del;
  }

  PerSpecies<int> where{};
  where.fill(-1);
  for (std::size_t k = 0; k < ns_count; ++k) where[idx(topo.storages[k].species)] = int(k);

  double used_kw = 0.0;
  for (std::size_t m = 0; m < nm; ++m) {
    PerSpecies<double> feed{};
    PerSpecies<double> room{};
    for (Species s : kAllSpecies) {
      const int k = where[idx(s)];
      feed[idx(s)] = k >= 0 ? ns.levels[k] : kInf;
      room[idx(s)] = k >= 0 ? topo.storages[k].capacity - ns.levels[k] : kInf;
    }
    const auto& mp = topo.modules[m];
    ModuleStepResult r = step_module(mp, state.modules[m], commands_kw[m], feed, room, dt_s);
    ns.modules[m] = r.state;

    const int kp = where[idx(mp.product)];
    ns.levels[kp] += r.production_kg;
    fl.produced[idx(mp.product)] += r.production_kg;
    for (const auto& f : mp.feeds) {
      const double c = r.consumption_kg[idx(f.species)];
      if (c == 0.0) continue;
      ns.levels[where[idx(f.species)]] -= c;
      fl.consumed[idx(f.species)] += c;
    }
    for (const auto& b : mp.byproducts) {
      const double q = r.byproduct_kg[idx(b.species)];
      const int kb = where[idx(b.species)];
      if (kb >= 0) {
        ns.levels[kb] += q;
        fl.produced[idx(b.species)] += q;
      } else {
        fl.vented[idx(b.species)] += q;
      }
    }
    fl.module_energy_kwh[m] = r.energy_kwh;
    fl.module_production_kg[m] = r.production_kg;
    used_kw += r.energy_kwh * 3600.0 / dt_s;
  }

  double charge_kw = 0.0;
  double discharge_kw = 0.0;
  if (auto b = topo.storage_of(Species::Electricity)) {
    const double surplus = available - used_kw;
    if (surplus > 0.0) {
      const double kwh =
          std::min(surplus * dt_s / 3600.0, topo.storages[*b].capacity - ns.levels[*b]);
      ns.levels[*b] += kwh;
      fl.produced[idx(Species::Electricity)] += kwh;
      charge_kw = kwh * 3600.0 / dt_s;
    } else if (surplus < 0.0) {
      const double kwh = std::min(-surplus * dt_s / 3600.0, ns.levels[*b]);
      ns.levels[*b] -= kwh;
      fl.consumed[idx(Species::Electricity)] += kwh;
      discharge_kw = kwh * 3600.0 / dt_s;
    }
  }

  ns.sim_time_s = state.sim_time_s + dt_s;
  ns.wind_mps = v_mps;
  ns.available_power_kw = available;
  ns.curtailed_power_kw = std::max(0.0, available + discharge_kw - used_kw - charge_kw);
  ns.last_flows = fl;
  return out;
}

}  // namespace ptx
