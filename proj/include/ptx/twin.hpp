#pragma once

// Digital twin: hierarchical information model, telemetry acquisition into an
// append-only history, published snapshots and executable what-if runs on the
// same plant step functions as the live simulation.

#include <array>
#include <atomic>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptx/control.hpp"
#include "ptx/forecast.hpp"
#include "ptx/plant.hpp"
#include "ptx/scheduler.hpp"

namespace ptx {

enum class NodeType : std::uint8_t { Platform, Module, Storage, Sensor };
std::string_view to_string(NodeType t);

struct PropertyValue {
  std::string text;  // static descriptive value ("kW", species name, ...)
  std::string unit;
  bool operator==(const PropertyValue&) const = default;
};

struct InfoNode {
  std::string id;
  NodeType type = NodeType::Platform;
  std::vector<std::pair<std::string, PropertyValue>> properties;  // ordered
  std::vector<InfoNode> children;

  const InfoNode* find(std::string_view node_id) const;
  bool operator==(const InfoNode&) const = default;
};

// Root "platform", one Module node per conversion module and one Storage node
// per storage (ids are the topology names), each with a Sensor child
// "<node>.<property>" per live property. Throws DuplicateName.
InfoNode build_information_model(const PlantTopology& topo);

struct TelemetryRecord {
  double time_s = 0.0;
  std::string node;
  std::string property;
  double value = 0.0;
  std::string unit;
};

struct TelemetrySample {
  double time_s = 0.0;
  double value = 0.0;
  bool operator==(const TelemetrySample&) const = default;
};

// The records a telemetry flush emits for a plant state; the twin's latest
// values must equal these after every flush.
std::vector<TelemetryRecord> telemetry_from_state(const PlantTopology& topo,
                                                  const PlantState& state);

// Append-only series for one stream. One writer, any number of concurrent
// readers: samples live in fixed-size chunks that never move, and readers only
// look below the published size.
class TelemetryLog {
 public:
  static constexpr std::size_t kChunk = 4096;
  static constexpr std::size_t kMaxChunks = 8192;

  TelemetryLog() = default;
  ~TelemetryLog();
  TelemetryLog(const TelemetryLog&) = delete;
  TelemetryLog& operator=(const TelemetryLog&) = delete;

  void append(TelemetrySample s);  // writer only
  std::size_t size() const { return size_.load(std::memory_order_acquire); }
  TelemetrySample at(std::size_t i) const;
  std::optional<TelemetrySample> back() const;
  // Samples with t_from <= time <= t_to (binary search on time).
  std::vector<TelemetrySample> range(double t_from, double t_to) const;

 private:
  struct Chunk {
    std::array<TelemetrySample, kChunk> data;
  };
  std::array<std::atomic<Chunk*>, kMaxChunks> chunks_{};
  std::atomic<std::size_t> size_{0};
};

struct Snapshot {
  double time_s = 0.0;
  PlantState state;
  std::shared_ptr<const Schedule> schedule;
  std::shared_ptr<const ForecastEnsemble> wind_forecast;
  std::shared_ptr<const PowerEnsemble> power_forecast;
  std::vector<Alarm> active_alarms;
  std::map<std::size_t, double> overrides;  // module -> target
  std::map<std::string, double> properties;  // "<node>.<property>" -> value
};

enum class ModelTag : std::uint8_t { DataModel, InformationModel, BehaviouralModel };
std::string_view to_string(ModelTag t);

using ModuleBehaviour = ModuleStepResult (*)(const ConversionModuleParams&, const ModuleState&,
                                             double, const PerSpecies<double>&,
                                             const PerSpecies<double>&, double);

struct ModelEntry {
  std::string node_id;
  ModelTag tag = ModelTag::DataModel;
  std::string description;
  ModuleBehaviour behaviour = nullptr;  // set for module behavioural models
};

std::vector<ModelEntry> build_model_registry(const PlantTopology& topo);

struct IngestResult {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

class DigitalTwin {
 public:
  explicit DigitalTwin(PlantTopology topo);

  const PlantTopology& topology() const { return topo_; }
  const InfoNode& model() const { return model_; }
  const std::vector<ModelEntry>& registry() const { return registry_; }

  // Single writer. Throws UnknownNode (nothing applied) if any record names an
  // unknown node/property; records older than their stream head are rejected,
  // counted, and reported by a TimeRegression thrown after the batch.
  IngestResult ingest(std::span<const TelemetryRecord> batch);
  // Telemetry flush of a plant state (every tick).
  void flush(const PlantState& state);

  bool has_stream(const std::string& node, const std::string& property) const;
  std::vector<std::pair<std::string, std::string>> streams() const;
  std::string unit_of(const std::string& node, const std::string& property) const;
  std::optional<TelemetrySample> latest(const std::string& node, const std::string& property) const;
  std::vector<TelemetrySample> query_history(const std::string& node, const std::string& property,
                                             double t_from, double t_to) const;
  std::size_t stream_size(const std::string& node, const std::string& property) const;
  std::size_t rejected_count() const { return rejected_.load(); }

  void publish(std::shared_ptr<const Snapshot> snap);
  std::shared_ptr<const Snapshot> snapshot() const;

  // CSV columns time_s,node_id,property,value,unit; streams in model order.
  void export_history_csv(std::ostream& out) const;

 private:
  struct Stream {
    std::string unit;
    TelemetryLog log;
  };
  const Stream& stream(const std::string& node, const std::string& property) const;

  PlantTopology topo_;
  InfoNode model_;
  std::vector<ModelEntry> registry_;
  std::vector<std::pair<std::string, std::string>> order_;
  // Built once in the constructor, never resized: lookups need no lock.
  std::map<std::pair<std::string, std::string>, std::unique_ptr<Stream>> streams_;
  std::atomic<std::size_t> rejected_{0};
  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snap_;
};

// Records whose twin latest value differs from the state (empty = in sync).
std::vector<std::string> sync_mismatches(const DigitalTwin& twin, const PlantState& state);

struct WhatIfRequest {
  // Either per-step module setpoints held for setpoint_step_s each...
  std::vector<std::vector<double>> setpoints_kw;  // [step][module]
  double setpoint_step_s = 900.0;
  double duration_s = 0.0;
  double dt_s = 10.0;
  // Wind per tick; a single value is held for the whole run.
  std::vector<double> wind_mps;
  // Ship transfers per tick (empty = none).
  std::vector<ShipOrder> ship_orders;
  // Route setpoints through a fresh control layer (ramp, interlocks,
  // shedding) instead of handing them to the plant as raw commands.
  bool through_control = true;
  std::optional<ControlConfig> control;
  bool record_states = false;
};

struct WhatIfResult {
  std::vector<double> time_s;                // end of each tick
  std::vector<std::vector<double>> levels;   // [tick][storage]
  std::vector<std::vector<double>> loads_kw; // [tick][module]
  std::vector<double> methanol_kg;           // cumulative production
  std::vector<FlowSet> flows;
  std::vector<PlantState> states;            // only with record_states
  PlantState final_state;
};

// Runs the plant step functions from a copy of the snapshot state. Throws
// InvalidSetpoint for negative, non-finite or above-capacity setpoints.
WhatIfResult what_if(const PlantTopology& topo, const Snapshot& snap, const WhatIfRequest& req);

// Median wind path of the snapshot's forecast, expanded to one value per tick.
std::vector<double> forecast_wind_per_tick(const Snapshot& snap, double duration_s, double dt_s);

}  // namespace ptx
