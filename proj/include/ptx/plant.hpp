#pragma once

// Asset layer: executable behavioural models of the wind farm and the
// conversion chain (desalination -> electrolysis -> methanol synthesis) with
// its storages, advanced in discrete time.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptx/species.hpp"

namespace ptx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct TurbineParams {
  int count = 4;
  double rated_power_kw = 15000.0;
  double cut_in_mps = 3.0;
  double rated_speed_mps = 12.0;
  double cut_out_mps = 25.0;

  double farm_rated_kw() const { return count * rated_power_kw; }
};

enum class ModuleKind : std::uint8_t { Desalination, Electrolysis, Synthesis };

std::string_view to_string(ModuleKind k);
std::optional<ModuleKind> module_kind_from_string(std::string_view name);

struct SpeciesRatio {
  Species species;
  double kg_per_kg;  // per kg of primary product
};

struct ConversionModuleParams {
  std::string name;
  ModuleKind kind = ModuleKind::Electrolysis;
  Species product = Species::Hydrogen;
  double p_max_kw = 0.0;
  double p_min_frac = 0.0;
  double ramp_kw_per_min = 0.0;
  double specific_energy_kwh_per_kg = 0.0;
  double startup_time_s = 0.0;
  std::vector<SpeciesRatio> feeds;
  std::vector<SpeciesRatio> byproducts;

  double p_min_kw() const { return p_min_frac * p_max_kw; }
  double ramp_per_step_kw(double dt_s) const { return ramp_kw_per_min * dt_s / 60.0; }
  double feed_ratio(Species s) const;
  double byproduct_ratio(Species s) const;
};

struct StorageParams {
  std::string name;
  Species species = Species::Water;
  double capacity = 0.0;  // kg, or kWh for Electricity
  double initial_level = 0.0;
  double min_level = 0.0;
};

// Storages are wired to modules by species: a module's feed of species S is
// drawn from the unique storage holding S, its product goes to the unique
// storage holding its product species.
struct PlantTopology {
  TurbineParams turbine;
  std::vector<ConversionModuleParams> modules;
  std::vector<StorageParams> storages;

  std::optional<std::size_t> storage_of(Species s) const;
  std::optional<std::size_t> module_index(std::string_view name) const;
};

// Throws ValidationError naming the violated invariant.
void validate(const TurbineParams& t);
void validate(const ConversionModuleParams& m);
void validate(const StorageParams& s);
void validate(const PlantTopology& topo);

// Default Fig.-3-style chain: 4 x 15 MW turbines, desalination, PEM
// electrolysis, methanol synthesis, water/H2/CO2/methanol storages.
PlantTopology default_topology();
ConversionModuleParams default_module(ModuleKind kind);

enum class ModuleMode : std::uint8_t { Off, Starting, Running, Stopping };

std::string_view to_string(ModuleMode m);

struct ModuleState {
  ModuleMode mode = ModuleMode::Off;
  double startup_remaining_s = 0.0;  // meaningful while Starting
  double load_kw = 0.0;              // 0 unless Running
  double commanded_kw = 0.0;

  bool operator==(const ModuleState&) const = default;
};

// Per-tick material and energy flows. All entries are non-negative.
struct FlowSet {
  PerSpecies<double> produced{};   // into storage (Electricity: battery charge)
  PerSpecies<double> consumed{};   // out of storage (Electricity: battery discharge)
  PerSpecies<double> offtake{};    // removed by ship
  PerSpecies<double> delivered{};  // supplied by ship
  PerSpecies<double> vented{};     // byproducts with no storage (oxygen)
  std::vector<double> module_energy_kwh;
  std::vector<double> module_production_kg;

  bool operator==(const FlowSet&) const = default;
};

struct PlantState {
  double sim_time_s = 0.0;
  double wind_mps = 0.0;
  std::vector<ModuleState> modules;
  std::vector<double> levels;  // per storage, same order as topology
  FlowSet last_flows;
  double available_power_kw = 0.0;
  double curtailed_power_kw = 0.0;

  bool operator==(const PlantState&) const = default;
};

PlantState initial_state(const PlantTopology& topo);

// Stable content hash of every field (used for purity checks).
std::uint64_t state_hash(const PlantState& s);

// Wind farm output in kW for hub-height wind speed v.
double power_curve(double v_mps, const TurbineParams& t);

// Range of non-zero commands that a module can follow during the next tick.
// Running: the ramp band intersected with [p_min, p_max]. Not running: the
// admissible load on entry to Running (a start request).
struct LoadBand {
  double lo = 0.0;
  double hi = 0.0;
};
LoadBand command_band(const ConversionModuleParams& p, const ModuleState& s, double dt_s);

// Mode machine and ramp limiting, before any feed/headroom derating. The
// returned load is what the module will draw if its feeds allow it.
ModuleState advance_mode(const ConversionModuleParams& p, const ModuleState& s,
                         double command_kw, double dt_s);

struct ModuleStepResult {
  ModuleState state;
  double production_kg = 0.0;
  PerSpecies<double> consumption_kg{};
  PerSpecies<double> byproduct_kg{};
  double energy_kwh = 0.0;
  bool derated = false;  // feed starvation or full product storage
};

// feed_available / headroom are per species; use kInf where unconstrained.
ModuleStepResult step_module(const ConversionModuleParams& p, const ModuleState& s,
                             double command_kw, const PerSpecies<double>& feed_available,
                             const PerSpecies<double>& headroom, double dt_s);

// Ship transfer requested for one tick. Offtake is clamped to the stored
// level, delivery to the free capacity.
struct ShipOrder {
  PerSpecies<double> offtake{};
  PerSpecies<double> delivery{};
};

struct PlantStepResult {
  PlantState state;
  FlowSet flows;
};

// Advances the whole plant by dt. Throws PowerInfeasible when the loads the
// commands would produce exceed the deliverable power.
PlantStepResult step_plant(const PlantTopology& topo, const PlantState& state,
                           std::span<const double> commands_kw, const ShipOrder& order,
                           double v_mps, double dt_s);

// Wind power plus whatever an Electricity storage could discharge in one tick.
double deliverable_power(const PlantTopology& topo, const PlantState& state, double v_mps,
                         double dt_s);

}  // namespace ptx
