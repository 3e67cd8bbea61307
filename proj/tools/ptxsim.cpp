// ptxsim: run, validate and what-if front end for the power-to-X simulator.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ptx/error.hpp"
#include "ptx/harness.hpp"
#include "ptx/json_io.hpp"
#include "ptx/scenario.hpp"
#include "ptx/teleop.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ptx::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ptx::Scenario load(const std::string& path, const std::optional<std::uint64_t>& seed,
                   const std::string& preset) {
  ptx::Scenario s = ptx::load_scenario(path);
  if (seed) s.seed = *seed;
  if (!preset.empty()) ptx::apply_preset(s, preset);
  ptx::validate(s);
  return s;
}

void print_summary(const ptx::RunReport& r, std::ostream& os) {
  os << "ticks " << r.ticks.size() << ", schedules " << r.schedules.size() << ", alarms " << r.alarms.size()
     << "\nmethanol produced " << r.totals.methanol_produced_kg << " kg"
     << "\nenergy available " << r.totals.energy_available_kwh << " kWh, used " << r.totals.energy_used_kwh
     << " kWh, curtailed " << r.totals.energy_curtailed_kwh << " kWh"
     << "\nwall clock " << r.wall_clock_s << " s\n";
}

int cmd_run(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& preset,
            const std::string& out, bool serve, bool hold, const std::string& host, std::optional<int> port,
            std::optional<double> speed) {
  ptx::Scenario s = load(path, seed, preset);
  if (!serve) {
    const ptx::RunReport r = ptx::run_headless(s);
    ptx::emit_report(r, out);
    print_summary(r, std::cout);
    std::cout << "artifacts written to " << out << "\n";
    return 0;
  }
  const auto t0 = std::chrono::steady_clock::now();
  ptx::Simulation sim(s, ptx::RunOptions{false, false, true, true});
  sim.clock().set_speed(speed.value_or(s.teleop.speed));
  ptx::TeleopService svc(sim);
  const int bound = svc.start(host.empty() ? s.teleop.host : host, port.value_or(s.teleop.port));
  std::cout << "serving on http://" << (host.empty() ? s.teleop.host : host) << ":" << bound << std::endl;
  ptx::run_paced(sim, g_stop);
  ptx::RunReport r = sim.take_report();
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ptx::emit_report(r, out);
  print_summary(r, std::cout);
  std::cout << "artifacts written to " << out << std::endl;
  if (hold) {
    std::cout << "run finished; still serving (Ctrl-C to exit)" << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  sim.events().close();
  svc.stop();
  return 0;
}

int cmd_whatif(const std::string& path, const std::string& setpoints, const std::string& out) {
  const ptx::Scenario s = load(path, std::nullopt, "");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(setpoints));
  } catch (const nlohmann::json::parse_error& e) {
    throw ptx::ParseError(setpoints, e.what());
  }
  ptx::WhatIfRequest req = ptx::whatif_request_from_json(j, s.topology, s.dt_sim_s);
  if (!(req.dt_s > 0.0)) throw ptx::InvalidSetpoint("dt_s must be positive");
  ptx::Snapshot snap;
  snap.state = ptx::scenario_initial_state(s);
  if (req.wind_mps.empty()) {
    // Without a live forecast, use the scenario's own wind source.
    ptx::WindGenerator w = ptx::make_wind_generator(s);
    const auto n = static_cast<std::size_t>(std::llround(req.duration_s / req.dt_s));
    for (std::size_t k = 0; k < n; ++k) req.wind_mps.push_back(w.at(static_cast<double>(k) * req.dt_s));
  }
  const ptx::WhatIfResult r = ptx::what_if(s.topology, snap, req);
  const std::string body = ptx::to_json(r, s.topology).dump(2) + "\n";
  if (out.empty()) {
    std::cout << body;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ptx::IoError("cannot open " + out + " for writing");
    f << body;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offshore power-to-methanol platform simulator"};
  app.require_subcommand(1);

  std::string path, out = "out", preset, host, setpoints, whatif_out;
  std::optional<std::uint64_t> seed;
  std::optional<int> port;
  std::optional<double> speed;
  bool serve = false, hold = false;

  auto* run = app.add_subcommand("run", "Run a scenario and write the report artifacts");
  run->add_option("scenario", path, "Scenario JSON file")->required();
  run->add_flag("--serve", serve, "Serve the teleoperation API while running");
  run->add_flag("--hold", hold, "With --serve: keep serving after the run finishes");
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--preset", preset, "Wind preset: low-wind | high-dynamics");
  run->add_option("--host", host, "Listen address (default from scenario)");
  run->add_option("--port", port, "Listen port, 0 = any (default from scenario)");
  run->add_option("--speed", speed, "Sim seconds per wall second when serving, <= 0 unpaced");

  auto* val = app.add_subcommand("validate", "Validate a scenario and print its fully-defaulted echo");
  std::string vpath;
  bool echo = false;
  val->add_option("scenario", vpath, "Scenario JSON file")->required();
  val->add_flag("--echo", echo, "Print the scenario with every default filled in");

  auto* wi = app.add_subcommand("whatif", "Run a what-if trajectory from the scenario's initial state");
  std::string wpath;
  wi->add_option("scenario", wpath, "Scenario JSON file")->required();
  wi->add_option("--setpoints", setpoints, "What-if request JSON")->required();
  wi->add_option("--out", whatif_out, "Write the result here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*run) return cmd_run(path, seed, preset, out, serve, hold, host, port, speed);
    if (*val) {
      const ptx::Scenario s = load(vpath, std::nullopt, "");
      if (echo) std::cout << ptx::scenario_to_json(s).dump(2) << "\n";
      else std::cout << "ok: " << s.name << "\n";
      return 0;
    }
    if (*wi) return cmd_whatif(wpath, setpoints, whatif_out);
  } catch (const std::exception& e) {
    const int code = ptx::exit_code_for(e);
    std::cerr << (code == 1 ? "invalid input: " : code == 3 ? "internal error: " : "error: ") << e.what() << "\n";
    return code;
  }
  return 0;
}
