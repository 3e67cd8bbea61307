#include "ptx/teleop.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "httplib.h"
#include "ptx/error.hpp"
#include "ptx/json_io.hpp"

namespace ptx {

using nlohmann::json;

namespace {

struct ApiError {
  int status;
  std::string code;
  std::string message;
};

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) {
  send_json(res, {{"error", {{"status", e.status}, {"code", e.code}, {"message", e.message}}}}, e.status);
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ApiError{400, "BAD_REQUEST", std::string("malformed JSON: ") + e.what()};
  }
}

double query_number(const httplib::Request& req, const char* key, double def) {
  if (!req.has_param(key)) return def;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t n = 0;
    const double d = std::stod(v, &n);
    if (n != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ApiError{400, "BAD_REQUEST", std::string("parameter '") + key + "' is not a number"};
  }
}

// Wraps a handler so ApiError and domain exceptions become error bodies.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ApiError& e) {
      send_error(res, e);
    } catch (const InvalidSetpoint& e) {
      send_error(res, {400, "INVALID_SETPOINT", e.what()});
    } catch (const ValidationError& e) {
      send_error(res, {400, "BAD_REQUEST", e.what()});
    } catch (const ParseError& e) {
      send_error(res, {400, "BAD_REQUEST", e.what()});
    } catch (const json::exception& e) {
      send_error(res, {400, "BAD_REQUEST", e.what()});
    }
  };
}

}  // namespace

TeleopService::TeleopService(Simulation& sim)
    : sim_(sim), topo_(sim.topology()), dt_s_(sim.scenario().dt_sim_s),
      srv_(std::make_unique<httplib::Server>()) {
  routes();
}

TeleopService::~TeleopService() { stop(); }

int TeleopService::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = srv_->bind_to_any_port(host);
    if (port_ < 0) throw IoError("cannot bind " + host);
  } else {
    if (!srv_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  thread_ = std::thread([this] { srv_->listen_after_bind(); });
  srv_->wait_until_ready();
  return port_;
}

void TeleopService::stop() {
  stopping_ = true;
  if (srv_) srv_->stop();
  if (thread_.joinable()) thread_.join();
}

void TeleopService::routes() {
  auto& s = *srv_;

  auto snapshot = [this] {
    auto snap = sim_.twin().snapshot();
    if (!snap) throw ApiError{503, "NOT_READY", "no snapshot published yet"};
    return snap;
  };

  s.Get("/api/state", guarded([this, snapshot](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    json alarms = json::array();
    for (const auto& a : snap->active_alarms) alarms.push_back(to_json(a));
    json ov = json::array();
    for (const auto& [m, target] : snap->overrides) {
      ov.push_back({{"module", topo_.modules[m].name},
                    {"target_kw", target},
                    {"operator_id", sim_.queue().holder(m).value_or("")}});
    }
    json j = {{"clock",
               {{"sim_time_s", snap->time_s},
                {"paused", sim_.clock().paused()},
                {"speed", sim_.clock().speed()}}},
              {"state", to_json(snap->state, topo_)},
              {"active_alarms", alarms},
              {"overrides", ov}};
    send_json(res, j);
  }));

  s.Get("/api/topology", guarded([this](const httplib::Request&, httplib::Response& res) {
    json reg = json::array();
    for (const auto& e : sim_.twin().registry()) {
      reg.push_back({{"node_id", e.node_id},
                     {"tag", std::string(to_string(e.tag))},
                     {"description", e.description},
                     {"executable", e.behaviour != nullptr}});
    }
    send_json(res, {{"model", to_json(sim_.twin().model())}, {"registry", reg}});
  }));

  s.Get("/api/forecast", guarded([snapshot](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    if (!snap->power_forecast) throw ApiError{503, "NOT_READY", "no forecast issued yet"};
    json j = to_json(*snap->power_forecast);
    if (snap->wind_forecast) j["wind"] = to_json(*snap->wind_forecast);
    send_json(res, j);
  }));

  s.Get("/api/schedule", guarded([this, snapshot](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    if (!snap->schedule) throw ApiError{503, "NOT_READY", "no schedule issued yet"};
    send_json(res, to_json(*snap->schedule, topo_));
  }));

  s.Get("/api/history", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("node") || !req.has_param("prop")) {
      throw ApiError{400, "BAD_REQUEST", "parameters 'node' and 'prop' are required"};
    }
    const std::string node = req.get_param_value("node");
    const std::string prop = req.get_param_value("prop");
    const double from = query_number(req, "from", -std::numeric_limits<double>::infinity());
    const double to = query_number(req, "to", std::numeric_limits<double>::infinity());
    if (!sim_.twin().model().find(node)) throw ApiError{404, "UNKNOWN_NODE", "unknown node '" + node + "'"};
    if (!sim_.twin().has_stream(node, prop)) {
      throw ApiError{404, "UNKNOWN_PROPERTY", "node '" + node + "' has no property '" + prop + "'"};
    }
    json t = json::array();
    json v = json::array();
    for (const auto& x : sim_.twin().query_history(node, prop, from, to)) {
      t.push_back(x.time_s);
      v.push_back(x.value);
    }
    send_json(res, {{"node", node},
                    {"property", prop},
                    {"unit", sim_.twin().unit_of(node, prop)},
                    {"time_s", t},
                    {"value", v}});
  }));

  s.Post("/api/override", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (sim_.queue().swap_pending()) throw ApiError{503, "SCENARIO_SWAP_IN_PROGRESS", "scenario swap in progress"};
    const json j = parse_body(req);
    if (!j.is_object() || !j.contains("module") || !j.at("module").is_string()) {
      throw ApiError{400, "BAD_REQUEST", "'module' (string) is required"};
    }
    const std::string name = j.at("module").get<std::string>();
    const auto m = topo_.module_index(name);
    if (!m) throw ApiError{400, "UNKNOWN_MODULE", "unknown module '" + name + "'"};
    OverrideCommand cmd;
    cmd.module = *m;
    cmd.operator_id = j.value("operator_id", std::string("operator"));
    cmd.reason = j.value("reason", std::string());
    const bool release = j.value("release", false) || (j.contains("target_kw") && j.at("target_kw").is_null()) ||
                         (j.contains("target_kw") && j.at("target_kw") == "release");
    if (!release) {
      if (!j.contains("target_kw") || !j.at("target_kw").is_number()) {
        throw ApiError{400, "BAD_REQUEST", "'target_kw' must be a number, null or \"release\""};
      }
      const double target = j.at("target_kw").get<double>();
      const double pmax = topo_.modules[*m].p_max_kw;
      if (!std::isfinite(target) || target < 0.0 || target > pmax) {
        throw ApiError{400, "OVERRIDE_OUT_OF_RANGE",
                       "target_kw must lie in [0, " + std::to_string(pmax) + "] for " + name};
      }
      cmd.target_kw = target;
    }
    json echo = {{"module", name},
                 {"operator_id", cmd.operator_id},
                 {"reason", cmd.reason},
                 {"target_kw", cmd.target_kw ? json(*cmd.target_kw) : json("release")}};
    const auto id = sim_.queue().submit_override(std::move(cmd));
    if (!id) {
      throw ApiError{409, "OVERRIDE_CONFLICT",
                     name + " is held by operator '" + sim_.queue().holder(*m).value_or("") + "'"};
    }
    echo["id"] = *id;
    send_json(res, echo, 202);
  }));

  s.Post("/api/whatif", guarded([this, snapshot](const httplib::Request& req, httplib::Response& res) {
    const json j = parse_body(req);
    auto snap = snapshot();
    WhatIfRequest w = whatif_request_from_json(j, topo_, dt_s_);
    if (!(w.dt_s > 0.0) || !(w.duration_s >= 0.0) || w.duration_s / w.dt_s > 1e6) {
      throw ApiError{400, "INVALID_SETPOINT", "duration_s / dt_s must be positive and at most 1e6 ticks"};
    }
    if (w.wind_mps.empty()) w.wind_mps = forecast_wind_per_tick(*snap, w.duration_s, w.dt_s);
    const WhatIfResult r = what_if(topo_, *snap, w);
    json out = to_json(r, topo_);
    out["from_time_s"] = snap->time_s;
    send_json(res, out);
  }));

  s.Post("/api/scenario", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (sim_.queue().swap_pending()) throw ApiError{503, "SCENARIO_SWAP_IN_PROGRESS", "scenario swap in progress"};
    const json j = parse_body(req);
    if (!j.is_object()) throw ApiError{400, "BAD_REQUEST", "body must be a JSON object"};
    ScenarioCommand cmd;
    if (j.contains("preset")) {
      cmd.preset = j.at("preset").get<std::string>();
      try {
        (void)preset_generator(WindGeneratorParams{}, cmd.preset);
      } catch (const ValidationError& e) {
        throw ApiError{400, "UNKNOWN_PRESET", e.what()};
      }
    }
    if (j.contains("trace")) {
      for (const auto& p : j.at("trace")) {
        cmd.trace.push_back({p.at("time_s").get<double>(), p.at("wind_mps").get<double>()});
      }
    } else if (j.contains("trace_csv")) {
      cmd.trace = parse_wind_trace_csv(j.at("trace_csv").get<std::string>(), "trace_csv");
    }
    for (std::size_t i = 0; i < cmd.trace.size(); ++i) {
      const auto& p = cmd.trace[i];
      if (!std::isfinite(p.wind_mps) || p.wind_mps < 0.0 || !std::isfinite(p.time_s) ||
          (i > 0 && !(p.time_s > cmd.trace[i - 1].time_s))) {
        throw ApiError{400, "BAD_REQUEST", "trace needs increasing times and finite non-negative winds"};
      }
    }
    if (!cmd.preset.empty() && !cmd.trace.empty()) {
      throw ApiError{400, "BAD_REQUEST", "give either a preset or a trace, not both"};
    }
    if (j.contains("ship_now_s")) {
      const double d = j.at("ship_now_s").get<double>();
      if (!(d > 0.0) || !std::isfinite(d)) throw ApiError{400, "BAD_REQUEST", "ship_now_s must be positive"};
      cmd.ship_now_s = d;
    }
    if (cmd.preset.empty() && cmd.trace.empty() && !cmd.ship_now_s) {
      throw ApiError{400, "BAD_REQUEST", "expected 'preset', 'trace', 'trace_csv' or 'ship_now_s'"};
    }
    const auto id = sim_.queue().submit_scenario(std::move(cmd));
    send_json(res, {{"id", id}, {"status", "queued"}}, 202);
  }));

  s.Post("/api/clock", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json j = parse_body(req);
    if (!j.is_object()) throw ApiError{400, "BAD_REQUEST", "body must be a JSON object"};
    if (j.contains("action")) {
      const auto a = j.at("action").get<std::string>();
      if (a == "pause") sim_.clock().pause();
      else if (a == "resume") sim_.clock().resume();
      else throw ApiError{400, "BAD_REQUEST", "action must be 'pause' or 'resume'"};
    }
    if (j.contains("speed")) {
      const double sp = j.at("speed").get<double>();
      if (!std::isfinite(sp)) throw ApiError{400, "BAD_REQUEST", "speed must be finite"};
      sim_.clock().set_speed(sp);
    }
    send_json(res, {{"paused", sim_.clock().paused()}, {"speed", sim_.clock().speed()}});
  }));

  s.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
    auto cursor = std::make_shared<std::uint64_t>(sim_.events().last_seq());
    if (req.has_header("Last-Event-ID")) {
      try {
        *cursor = std::stoull(req.get_header_value("Last-Event-ID"));
      } catch (const std::exception&) {
      }
    } else if (req.has_param("since")) {
      try {
        *cursor = std::stoull(req.get_param_value("since"));
      } catch (const std::exception&) {
      }
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
      if (stopping_) return false;
      const auto evs = sim_.events().since(*cursor, 1000);
      std::string out;
      if (evs.empty()) {
        if (sim_.events().closed()) {
          sink.done();
          return true;
        }
        out = ": heartbeat\n\n";
      }
      for (const auto& e : evs) {
        out += "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + e.data + "\n\n";
        *cursor = e.seq;
      }
      return sink.write(out.data(), out.size());
    });
  });

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) send_error(res, {404, "NOT_FOUND", "no such endpoint"});
  });
}

void run_paced(Simulation& sim, const std::atomic<bool>& stop) {
  using clk = std::chrono::steady_clock;
  auto next = clk::now();
  const double dt = sim.scenario().dt_sim_s;
  while (!sim.done() && !stop) {
    if (sim.clock().paused()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      next = clk::now();
      continue;
    }
    sim.step();
    const double sp = sim.clock().speed();
    if (sp > 0.0) {
      next += std::chrono::duration_cast<clk::duration>(std::chrono::duration<double>(dt / sp));
      const auto now = clk::now();
      if (next > now) {
        std::this_thread::sleep_until(next);
      } else if (now - next > std::chrono::seconds(1)) {
        next = now;  // fell behind; don't try to catch up in a burst
      }
    } else {
      next = clk::now();
    }
  }
}

}  // namespace ptx
