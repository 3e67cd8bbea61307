#pragma once

// HTTP/JSON + server-sent-events access to a running Simulation. Reads go
// through the twin's published snapshot and the lock-free history store;
// every mutation is enqueued for the loop thread's next tick boundary.
//
// Error bodies: {"error": {"status": int, "code": str, "message": str}} with
// code one of kErrorCodes.

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "ptx/harness.hpp"

namespace httplib {
class Server;
}

namespace ptx {

inline const std::vector<std::string> kErrorCodes = {
    "BAD_REQUEST",       // 400 malformed JSON or parameters
    "OVERRIDE_OUT_OF_RANGE",  // 400 target outside [0, p_max]
    "UNKNOWN_MODULE",    // 400
    "UNKNOWN_PRESET",    // 400
    "INVALID_SETPOINT",  // 400 what-if input
    "UNKNOWN_NODE",      // 404
    "UNKNOWN_PROPERTY",  // 404
    "NOT_FOUND",         // 404 unknown route
    "OVERRIDE_CONFLICT",  // 409 another operator holds the module
    "NOT_READY",         // 503 nothing published yet
    "SCENARIO_SWAP_IN_PROGRESS",  // 503
};

class TeleopService {
 public:
  explicit TeleopService(Simulation& sim);
  ~TeleopService();
  TeleopService(const TeleopService&) = delete;
  TeleopService& operator=(const TeleopService&) = delete;

  // Binds (port 0 = any free port) and serves on background threads.
  // Returns the bound port. Throws IoError when binding fails.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  Simulation& sim_;
  PlantTopology topo_;  // immutable copy, safe to read from handler threads
  double dt_s_ = 10.0;
  std::unique_ptr<httplib::Server> srv_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

// Steps the simulation at the pace set by its clock (speed = sim seconds per
// wall second, <= 0 unpaced) until done or until stop is set. Paused clocks
// neither step nor drain the command queue.
void run_paced(Simulation& sim, const std::atomic<bool>& stop);

}  // namespace ptx
