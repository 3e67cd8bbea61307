#pragma once

// JSON views of the domain types, shared by the report writer and the
// teleoperation API. Field names are part of the API contract.

#include "json.hpp"
#include "ptx/control.hpp"
#include "ptx/forecast.hpp"
#include "ptx/plant.hpp"
#include "ptx/scheduler.hpp"
#include "ptx/twin.hpp"

namespace ptx {

nlohmann::json to_json(const PlantState& s, const PlantTopology& topo);
nlohmann::json to_json(const Schedule& s, const PlantTopology& topo);
// Compact summary (no per-step trajectories).
nlohmann::json schedule_summary(const Schedule& s, const PlantTopology& topo);
nlohmann::json to_json(const Alarm& a);
nlohmann::json to_json(const InfoNode& n);
nlohmann::json to_json(const PowerEnsemble& p);  // quantile trajectories only
nlohmann::json to_json(const ForecastEnsemble& e);  // quantile trajectories only
nlohmann::json to_json(const WhatIfResult& r, const PlantTopology& topo);

// Accepts {"setpoint_step_s", "duration_s", "dt_s", "wind_mps" (number or
// array), "through_control", "setpoints": [ {module: kW, ...} | [kW, ...] ]}.
// Throws InvalidSetpoint for malformed input.
WhatIfRequest whatif_request_from_json(const nlohmann::json& j, const PlantTopology& topo,
                                       double default_dt_s);

}  // namespace ptx
