#include "ptx/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ptx/error.hpp"

namespace ptx {

namespace {

double hours(const ScheduleProblem& p) { return p.step_s / 3600.0; }

bool in_range(std::size_t t, std::size_t first, std::size_t end) { return t >= first && t < end; }

std::optional<double> pin_at(const ScheduleProblem& p, std::size_t m, std::size_t t) {
  std::optional<double> v;
  for (const auto& pin : p.pins) {
    if (pin.module == m && in_range(t, pin.first_step, pin.end_step)) v = pin.load_kw;
  }
  return v;
}

bool maintenance_at(const ScheduleProblem& p, std::size_t m, std::size_t t) {
  return std::any_of(p.maintenance.begin(), p.maintenance.end(), [&](const auto& w) {
    return w.module == m && in_range(t, w.first_step, w.end_step);
  });
}

// Load bounds of module m at step t: pins win over maintenance.
std::pair<double, double> load_bounds(const ScheduleProblem& p, std::size_t m, std::size_t t) {
  if (auto v = pin_at(p, m, t)) return {*v, *v};
  if (maintenance_at(p, m, t)) return {0.0, 0.0};
  return {0.0, p.topology.modules[m].p_max_kw};
}

double pinned_sum(const ScheduleProblem& p, std::size_t t) {
  double s = 0.0;
  for (std::size_t m = 0; m < p.topology.modules.size(); ++m) {
    if (auto v = pin_at(p, m, t)) s += *v;
  }
  return s;
}

// kg of species k into (+) or out of (-) storage per kW of module m over one step.
double storage_coef(const ScheduleProblem& p, std::size_t m, Species k) {
  const auto& mod = p.topology.modules[m];
  const double kg_per_kw = hours(p) / mod.specific_energy_kwh_per_kg;
  double c = 0.0;
  if (mod.product == k) c += kg_per_kw;
  c -= mod.feed_ratio(k) * kg_per_kw;
  c += mod.byproduct_ratio(k) * kg_per_kw;
  return c;
}

std::vector<std::size_t> scheduled_storages(const PlantTopology& topo) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    if (topo.storages[k].species != Species::Electricity) out.push_back(k);
  }
  return out;
}

const ShipWindow* ship_at(const ScheduleProblem& p, std::size_t t) {
  for (const auto& w : p.ships) {
    if (in_range(t, w.first_step, w.end_step)) return &w;
  }
  return nullptr;
}

double storage_lower(const ScheduleProblem& p, std::size_t k) {
  return std::min(p.topology.storages[k].min_level, p.initial_levels[k]);
}

std::string step_name(const std::string& base, std::size_t t) {
  return base + "[" + std::to_string(t) + "]";
}

}  // namespace

void validate(const ScheduleProblem& p) {
  validate(p.topology);
  const auto nm = p.topology.modules.size();
  const auto ns = p.topology.storages.size();
  if (p.horizon_steps < 1) throw ValidationError("schedule: horizon_steps must be >= 1");
  if (!(p.step_s > 0.0)) throw ValidationError("schedule: step must be > 0");
  if (p.power_forecast_kw.size() != p.horizon_steps) {
    throw ValidationError("schedule: forecast length must equal horizon_steps");
  }
  for (double f : p.power_forecast_kw) {
    if (!(f >= 0.0) || !std::isfinite(f)) {
      throw ValidationError("schedule: forecast values must be finite and >= 0");
    }
  }
  if (p.initial_levels.size() != ns) throw ValidationError("schedule: one initial level per storage");
  if (p.initial_loads_kw.size() != nm) throw ValidationError("schedule: one initial load per module");
  for (std::size_t k = 0; k < ns; ++k) {
    const double v = p.initial_levels[k];
    if (!(v >= 0.0) || v > p.topology.storages[k].capacity * (1.0 + 1e-12) + 1e-9) {
      throw ValidationError("schedule: initial level of '" + p.topology.storages[k].name +
                            "' outside [0, capacity]");
    }
  }
  for (std::size_t m = 0; m < nm; ++m) {
    const double v = p.initial_loads_kw[m];
    if (!(v >= 0.0) || v > p.topology.modules[m].p_max_kw) {
      throw ValidationError("schedule: initial load outside [0, p_max]");
    }
  }
  for (const auto& pin : p.pins) {
    if (pin.module >= nm) throw ValidationError("schedule: pin references unknown module");
    if (!(pin.load_kw >= 0.0) || pin.load_kw > p.topology.modules[pin.module].p_max_kw) {
      throw ValidationError("schedule: pinned value of '" + p.topology.modules[pin.module].name +
                            "' outside [0, p_max]");
    }
    if (pin.first_step > pin.end_step) throw ValidationError("schedule: pin range reversed");
  }
  for (const auto& w : p.maintenance) {
    if (w.module >= nm) throw ValidationError("schedule: maintenance references unknown module");
    if (w.first_step > w.end_step) throw ValidationError("schedule: maintenance range reversed");
  }
  for (std::size_t i = 0; i < p.ships.size(); ++i) {
    const auto& w = p.ships[i];
    if (w.first_step > w.end_step) throw ValidationError("schedule: ship window reversed");
    for (Species s : kAllSpecies) {
      if (!(w.offtake_capacity[idx(s)] >= 0.0) || !(w.delivery_capacity[idx(s)] >= 0.0)) {
        throw ValidationError("schedule: ship capacities must be >= 0");
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = p.ships[j];
      if (w.first_step < o.end_step && o.first_step < w.end_step) {
        throw ValidationError("schedule: ship windows overlap");
      }
    }
  }
  const auto& lt = p.weights.lambda_terminal;
  if (!lt.empty() && lt.size() != ns) {
    throw ValidationError("schedule: lambda_terminal needs one weight per storage");
  }
  if (!(p.weights.lambda_curtail >= 0.0) || !(p.weights.lambda_offtake >= 0.0) ||
      !(p.weights.lambda_shortfall >= 0.0)) {
    throw ValidationError("schedule: objective weights must be >= 0");
  }
}

std::vector<double> terminal_weights(const ScheduleProblem& p) {
  if (!p.weights.lambda_terminal.empty()) return p.weights.lambda_terminal;
  std::vector<double> w(p.topology.storages.size(), 1e-3);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const Species s = p.topology.storages[k].species;
    if (s == Species::Methanol || s == Species::Electricity) w[k] = 0.0;
  }
  return w;
}

bool ramp_row_active(const ScheduleProblem& p, std::size_t m, std::size_t t) {
  const auto& mod = p.topology.modules[m];
  const double r = mod.ramp_per_step_kw(p.step_s);
  // A band at least as wide as the capacity can never bind.
  if (r >= mod.p_max_kw) return false;
  auto fixed = [&](std::size_t s) { return pin_at(p, m, s).has_value() || maintenance_at(p, m, s); };
  if (fixed(t)) return false;
  if (t > 0 && fixed(t - 1)) return false;
  return true;
}

LinearProgram build_lp(const ScheduleProblem& p, LpLayout* layout_out) {
  validate(p);
  const auto& topo = p.topology;
  const std::size_t T = p.horizon_steps;
  const std::size_t nm = topo.modules.size();
  LpLayout L;
  L.scheduled_storages = scheduled_storages(topo);
  const std::size_t nk = L.scheduled_storages.size();
  const double h = hours(p);
  const auto lam_term = terminal_weights(p);

  LinearProgram lp;
  L.load.assign(nm, std::vector<std::size_t>(T));
  L.curtail.resize(T);
  L.shortfall.assign(T, std::nullopt);
  L.level.assign(nk, std::vector<std::size_t>(T));
  L.offtake.assign(T, {});
  L.delivery.assign(T, {});

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < nm; ++m) {
      const auto& mod = topo.modules[m];
      const auto [lo, hi] = load_bounds(p, m, t);
      const double gain = mod.product == Species::Methanol ? h / mod.specific_energy_kwh_per_kg : 0.0;
      L.load[m][t] = lp.add_variable(step_name("p_" + mod.name, t), lo, hi, gain);
    }
    L.curtail[t] = lp.add_variable(step_name("curtail", t), 0.0, kInf, -p.weights.lambda_curtail * h);
    const double ps = pinned_sum(p, t);
    if (ps > 0.0) {
      L.shortfall[t] =
          lp.add_variable(step_name("shortfall", t), 0.0, ps, -p.weights.lambda_shortfall * h);
    }
    for (std::size_t j = 0; j < nk; ++j) {
      const std::size_t k = L.scheduled_storages[j];
      const auto& st = topo.storages[k];
      const double c = t + 1 == T ? lam_term[k] : 0.0;
      L.level[j][t] = lp.add_variable(step_name("s_" + st.name, t), storage_lower(p, k), st.capacity, c);
    }
    if (const ShipWindow* w = ship_at(p, t)) {
      for (std::size_t j = 0; j < nk; ++j) {
        const auto& st = topo.storages[L.scheduled_storages[j]];
        const std::size_t s = idx(st.species);
        if (w->offtake_capacity[s] > 0.0) {
          L.offtake[t][s] = lp.add_variable(step_name("off_" + st.name, t), 0.0,
                                            w->offtake_capacity[s], p.weights.lambda_offtake);
        }
        if (w->delivery_capacity[s] > 0.0) {
          L.delivery[t][s] = lp.add_variable(step_name("del_" + st.name, t), 0.0,
                                             w->delivery_capacity[s], 0.0);
        }
      }
    }
  }

  for (std::size_t t = 0; t < T; ++t) {
    // power balance
    std::vector<LpTerm> bal;
    for (std::size_t m = 0; m < nm; ++m) bal.push_back({L.load[m][t], 1.0});
    bal.push_back({L.curtail[t], 1.0});
    if (L.shortfall[t]) bal.push_back({*L.shortfall[t], -1.0});
    lp.add_row(step_name("power", t), std::move(bal), Relation::Equal, p.power_forecast_kw[t]);

    // storage balance: s(t) - s(t-1) - sum coef*p(t) + off(t) - del(t) = 0
    for (std::size_t j = 0; j < nk; ++j) {
      const std::size_t k = L.scheduled_storages[j];
      const Species sp = topo.storages[k].species;
      std::vector<LpTerm> row{{L.level[j][t], 1.0}};
      double rhs = 0.0;
      if (t == 0) {
        rhs = p.initial_levels[k];
      } else {
        row.push_back({L.level[j][t - 1], -1.0});
      }
      for (std::size_t m = 0; m < nm; ++m) {
        const double c = storage_coef(p, m, sp);
        if (c != 0.0) row.push_back({L.load[m][t], -c});
      }
      if (auto v = L.offtake[t][idx(sp)]) row.push_back({*v, 1.0});
      if (auto v = L.delivery[t][idx(sp)]) row.push_back({*v, -1.0});
      lp.add_row(step_name("bal_" + topo.storages[k].name, t), std::move(row), Relation::Equal, rhs);
    }

    // ramps
    for (std::size_t m = 0; m < nm; ++m) {
      if (!ramp_row_active(p, m, t)) continue;
      const auto& mod = topo.modules[m];
      const double r = mod.ramp_per_step_kw(p.step_s);
      if (t == 0) {
        const double p0 = p.initial_loads_kw[m];
        lp.add_row(step_name("up_" + mod.name, t), {{L.load[m][0], 1.0}}, Relation::LessEqual, p0 + r);
        if (p.ramp_down_rows) {
          lp.add_row(step_name("down_" + mod.name, t), {{L.load[m][0], 1.0}},
                     Relation::GreaterEqual, p0 - r);
        }
      } else {
        lp.add_row(step_name("up_" + mod.name, t), {{L.load[m][t], 1.0}, {L.load[m][t - 1], -1.0}},
                   Relation::LessEqual, r);
        if (p.ramp_down_rows) {
          lp.add_row(step_name("down_" + mod.name, t),
                     {{L.load[m][t], 1.0}, {L.load[m][t - 1], -1.0}}, Relation::GreaterEqual, -r);
        }
      }
    }
  }

  // Window totals, only where a finite capacity can bind across several steps.
  for (std::size_t w = 0; w < p.ships.size(); ++w) {
    const auto& win = p.ships[w];
    const std::size_t end = std::min(win.end_step, T);
    for (Species s : kAllSpecies) {
      for (int dir = 0; dir < 2; ++dir) {
        const double cap = dir == 0 ? win.offtake_capacity[idx(s)] : win.delivery_capacity[idx(s)];
        if (!(cap > 0.0) || !std::isfinite(cap)) continue;
        std::vector<LpTerm> row;
        for (std::size_t t = win.first_step; t < end; ++t) {
          const auto& v = dir == 0 ? L.offtake[t][idx(s)] : L.delivery[t][idx(s)];
          if (v) row.push_back({*v, 1.0});
        }
        if (row.size() < 2) continue;
        lp.add_row((dir == 0 ? "ship_off_" : "ship_del_") + std::string(to_string(s)) + "[" +
                       std::to_string(w) + "]",
                   std::move(row), Relation::LessEqual, cap);
      }
    }
  }

  if (layout_out) *layout_out = std::move(L);
  return lp;
}

std::vector<std::string> check_schedule(const ScheduleProblem& p, const Schedule& s, double tol) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& what, std::size_t t, double v) {
    std::ostringstream os;
    os << what << " at step " << t << " (value " << v << ")";
    bad.push_back(os.str());
  };
  const auto& topo = p.topology;
  const std::size_t T = p.horizon_steps;
  const std::size_t nm = topo.modules.size();
  const double h = hours(p);
  if (s.setpoints_kw.size() != nm || s.curtail_kw.size() != T ||
      s.storage_kg.size() != topo.storages.size()) {
    bad.push_back("schedule dimensions do not match the problem");
    return bad;
  }
  auto near = [&](double a, double b) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); };

  for (std::size_t t = 0; t < T; ++t) {
    double sum = s.curtail_kw[t];
    for (std::size_t m = 0; m < nm; ++m) {
      const double v = s.setpoints_kw[m][t];
      sum += v;
      const double pmax = topo.modules[m].p_max_kw;
      if (v < -tol || v > pmax + tol * (1.0 + pmax)) fail("load of " + topo.modules[m].name + " out of range", t, v);
      if (auto pin = pin_at(p, m, t)) {
        if (v != *pin) fail("load of " + topo.modules[m].name + " differs from its pin", t, v);
      } else if (maintenance_at(p, m, t) && v != 0.0) {
        fail("load of " + topo.modules[m].name + " non-zero during maintenance", t, v);
      }
      if (ramp_row_active(p, m, t)) {
        const double prev = t == 0 ? p.initial_loads_kw[m] : s.setpoints_kw[m][t - 1];
        const double r = topo.modules[m].ramp_per_step_kw(p.step_s);
        const double slack = tol * (1.0 + topo.modules[m].p_max_kw);
        if (v - prev > r + slack) fail("ramp-up limit of " + topo.modules[m].name, t, v - prev);
        if (p.ramp_down_rows && prev - v > r + slack) {
          fail("ramp-down limit of " + topo.modules[m].name, t, prev - v);
        }
      }
    }
    const double shortfall = s.shortfall_kw.empty() ? 0.0 : s.shortfall_kw[t];
    if (s.curtail_kw[t] < -tol) fail("negative curtailment", t, s.curtail_kw[t]);
    if (shortfall < -tol || shortfall > pinned_sum(p, t) + tol) fail("shortfall out of range", t, shortfall);
    if (!near(sum - shortfall, p.power_forecast_kw[t])) fail("power balance", t, sum - shortfall);
  }

  // Storage trajectories, re-simulated from the initial levels.
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    const auto& st = topo.storages[k];
    if (st.species == Species::Electricity) continue;
    const std::size_t si = idx(st.species);
    double level = p.initial_levels[k];
    const double lo = storage_lower(p, k);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t m = 0; m < nm; ++m) {
        const auto& mod = topo.modules[m];
        const double prod = s.setpoints_kw[m][t] * h / mod.specific_energy_kwh_per_kg;
        if (mod.product == st.species) level += prod;
        level -= mod.feed_ratio(st.species) * prod;
        level += mod.byproduct_ratio(st.species) * prod;
      }
      const double off = s.offtake_kg[si].empty() ? 0.0 : s.offtake_kg[si][t];
      const double del = s.delivery_kg[si].empty() ? 0.0 : s.delivery_kg[si][t];
      const ShipWindow* w = ship_at(p, t);
      const double off_cap = w ? w->offtake_capacity[si] : 0.0;
      const double del_cap = w ? w->delivery_capacity[si] : 0.0;
      if (off < -tol || off > off_cap + tol * (1.0 + off_cap)) fail("offtake of " + st.name + " outside its window", t, off);
      if (del < -tol || del > del_cap + tol * (1.0 + del_cap)) fail("delivery of " + st.name + " outside its window", t, del);
      level += del - off;
      const double scale = 1.0 + st.capacity;
      if (level < lo - tol * scale || level > st.capacity + tol * scale) {
        fail("level of " + st.name + " outside its bounds", t, level);
      }
      if (std::abs(level - s.storage_kg[k][t]) > tol * scale) {
        fail("predicted level of " + st.name + " inconsistent with the flows", t, s.storage_kg[k][t]);
      }
    }
  }

  for (std::size_t w = 0; w < p.ships.size(); ++w) {
    const auto& win = p.ships[w];
    for (Species sp : kAllSpecies) {
      const std::size_t si = idx(sp);
      double off = 0.0, del = 0.0;
      for (std::size_t t = win.first_step; t < std::min(win.end_step, T); ++t) {
        if (!s.offtake_kg[si].empty()) off += s.offtake_kg[si][t];
        if (!s.delivery_kg[si].empty()) del += s.delivery_kg[si][t];
      }
      if (off > win.offtake_capacity[si] + tol * (1.0 + win.offtake_capacity[si])) {
        fail("ship offtake total of " + std::string(to_string(sp)), win.first_step, off);
      }
      if (del > win.delivery_capacity[si] + tol * (1.0 + win.delivery_capacity[si])) {
        fail("ship delivery total of " + std::string(to_string(sp)), win.first_step, del);
      }
    }
  }
  return bad;
}

Schedule schedule(const ScheduleProblem& p, const LpOptions& opts) {
  LpLayout L;
  const LinearProgram lp = build_lp(p, &L);
  const LpSolution sol = solve_lp(lp, opts);

  Schedule s;
  s.issued_at_s = p.issued_at_s;
  s.forecast_issued_at_s = p.forecast_issued_at_s;
  s.step_s = p.step_s;
  s.horizon_steps = p.horizon_steps;
  s.status = sol.status;
  s.ramp_down_relaxed = !p.ramp_down_rows;
  s.lp_iterations = sol.iterations;
  s.forecast_kw = p.power_forecast_kw;
  for (const auto& pin : p.pins) {
    if (std::find(s.pinned_modules.begin(), s.pinned_modules.end(), pin.module) ==
        s.pinned_modules.end()) {
      s.pinned_modules.push_back(pin.module);
    }
  }
  std::sort(s.pinned_modules.begin(), s.pinned_modules.end());
  if (sol.status != LpStatus::Optimal) return s;

  const std::size_t T = p.horizon_steps;
  const auto& topo = p.topology;
  const double h = hours(p);
  s.objective = sol.objective;
  s.setpoints_kw.assign(topo.modules.size(), std::vector<double>(T));
  s.storage_kg.assign(topo.storages.size(), std::vector<double>(T, 0.0));
  s.curtail_kw.resize(T);
  s.shortfall_kw.assign(T, 0.0);
  for (auto& v : s.offtake_kg) v.assign(T, 0.0);
  for (auto& v : s.delivery_kg) v.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < topo.modules.size(); ++m) {
      const double v = sol.x[L.load[m][t]];
      s.setpoints_kw[m][t] = v;
      const auto& mod = topo.modules[m];
      if (mod.product == Species::Methanol) s.methanol_kg += v * h / mod.specific_energy_kwh_per_kg;
    }
    s.curtail_kw[t] = sol.x[L.curtail[t]];
    if (L.shortfall[t]) s.shortfall_kw[t] = sol.x[*L.shortfall[t]];
    for (std::size_t j = 0; j < L.scheduled_storages.size(); ++j) {
      s.storage_kg[L.scheduled_storages[j]][t] = sol.x[L.level[j][t]];
    }
    for (std::size_t sp = 0; sp < kSpeciesCount; ++sp) {
      if (auto v = L.offtake[t][sp]) s.offtake_kg[sp][t] = sol.x[*v];
      if (auto v = L.delivery[t][sp]) s.delivery_kg[sp][t] = sol.x[*v];
    }
  }
  // Electricity storages are not scheduled; they hold their level.
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    if (topo.storages[k].species == Species::Electricity) {
      std::fill(s.storage_kg[k].begin(), s.storage_kg[k].end(), p.initial_levels[k]);
    }
  }

  const auto problems = check_schedule(p, s);
  if (!problems.empty()) {
    std::string msg = "optimal schedule failed the feasibility check: " + problems.front();
    if (problems.size() > 1) msg += " (+" + std::to_string(problems.size() - 1) + " more)";
    throw FeasibilityCheckFailed(msg);
  }
  return s;
}

bool receding_step(double now_s, std::optional<double> last_issued_s,
                   const ReschedulePolicy& policy, const RescheduleTriggers& triggers) {
  if (!last_issued_s) return true;
  if (triggers.override_changed || triggers.ship_arrival || triggers.power_deviation) return true;
  // Tolerate accumulated float error in the simulation clock.
  return now_s - *last_issued_s >= policy.interval_s - 1e-9 * std::max(1.0, policy.interval_s);
}

}  // namespace ptx
