#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace oracle {

using ptx::LinearProgram;
using ptx::LpStatus;
using ptx::Relation;

namespace {

struct Halfspace {
  std::vector<double> a;
  double b;
  bool equality;
};

// Gaussian elimination with partial pivoting; false when (near) singular.
bool solve_dense(std::vector<std::vector<double>> m, std::vector<double> rhs, std::vector<double>& x) {
  const std::size_t n = rhs.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    if (std::abs(m[piv][c]) < 1e-10) return false;
    std::swap(m[piv], m[c]);
    std::swap(rhs[piv], rhs[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
      rhs[r] -= f * rhs[c];
    }
  }
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i] / m[i][i];
  return true;
}

VertexResult enumerate_boxed(const LinearProgram& lp, double box) {
  const std::size_t n = lp.num_vars();
  std::vector<Halfspace> eqs, ineqs;
  for (const auto& row : lp.rows) {
    std::vector<double> a(n, 0.0);
    for (const auto& t : row.terms) a[t.var] += t.coef;
    switch (row.rel) {
      case Relation::Equal: eqs.push_back({a, row.rhs, true}); break;
      case Relation::LessEqual: ineqs.push_back({a, row.rhs, false}); break;
      case Relation::GreaterEqual: {
        for (double& v : a) v = -v;
        ineqs.push_back({a, -row.rhs, false});
        break;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> a(n, 0.0);
    a[j] = 1.0;
    ineqs.push_back({a, std::isfinite(lp.upper[j]) ? lp.upper[j] : box, false});
    a[j] = -1.0;
    ineqs.push_back({a, std::isfinite(lp.lower[j]) ? -lp.lower[j] : box, false});
  }

  auto feasible = [&](const std::vector<double>& x) {
    auto ok = [&](const Halfspace& h) {
      double s = 0.0, scale = std::abs(h.b);
      for (std::size_t j = 0; j < n; ++j) {
        s += h.a[j] * x[j];
        scale = std::max(scale, std::abs(h.a[j] * x[j]));
      }
      const double tol = 1e-9 * (1.0 + scale);
      return h.equality ? std::abs(s - h.b) <= tol : s <= h.b + tol;
    };
    return std::all_of(eqs.begin(), eqs.end(), ok) && std::all_of(ineqs.begin(), ineqs.end(), ok);
  };

  VertexResult best;
  // Every vertex is the solution of n linearly independent active
  // constraints; equalities are always active.
  std::vector<const Halfspace*> pool;
  for (const auto& h : eqs) pool.push_back(&h);
  const std::size_t neq = eqs.size();
  for (const auto& h : ineqs) pool.push_back(&h);

  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (pick.size() == n) {
      std::vector<std::vector<double>> m;
      std::vector<double> rhs;
      for (std::size_t i : pick) {
        m.push_back(pool[i]->a);
        rhs.push_back(pool[i]->b);
      }
      std::vector<double> x;
      if (!solve_dense(m, rhs, x) || !feasible(x)) return;
      double obj = 0.0;
      for (std::size_t j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
      if (best.status != LpStatus::Optimal || obj > best.objective) {
        best.status = LpStatus::Optimal;
        best.objective = obj;
        best.x = x;
      }
      return;
    }
    for (std::size_t i = start; i < pool.size(); ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  if (neq <= n) {
    // Equalities must be in every pick: seed them, then choose the rest.
    for (std::size_t i = 0; i < neq; ++i) pick.push_back(i);
    rec(neq);
  } else {
    // More equalities than variables: any n independent ones define the only
    // candidate point; still check all of them for feasibility.
    rec(0);
  }
  return best;
}

}  // namespace

VertexResult enumerate_vertices(const LinearProgram& lp, double box) {
  VertexResult a = enumerate_boxed(lp, box);
  if (a.status != LpStatus::Optimal) return a;
  bool any_infinite = false;
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    any_infinite = any_infinite || !std::isfinite(lp.lower[j]) || !std::isfinite(lp.upper[j]);
  }
  if (!any_infinite) return a;
  const VertexResult b = enumerate_boxed(lp, 2.0 * box);
  if (b.objective > a.objective + 1e-6 * (1.0 + std::abs(a.objective))) {
    VertexResult u;
    u.status = LpStatus::Unbounded;
    return u;
  }
  return a;
}

LinearProgram random_small_lp(std::mt19937_64& rng) {
  auto irand = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  LinearProgram lp;
  const int n = irand(1, 6);
  const int m = irand(1, 6);
  const bool all_finite = irand(0, 9) < 6;
  for (int j = 0; j < n; ++j) {
    double lo = 0.0, hi = irand(1, 10);
    if (!all_finite) {
      switch (irand(0, 4)) {
        case 0: hi = ptx::kInf; break;
        case 1: lo = -ptx::kInf; hi = ptx::kInf; break;
        case 2: lo = -irand(0, 5); hi = ptx::kInf; break;
        case 3: lo = -ptx::kInf; hi = irand(0, 6); break;
        default: break;
      }
    } else if (irand(0, 3) == 0) {
      lo = -irand(1, 5);
    }
    lp.add_variable("x" + std::to_string(j), lo, hi, irand(-5, 5));
  }
  for (int i = 0; i < m; ++i) {
    std::vector<ptx::LpTerm> terms;
    for (int j = 0; j < n; ++j) {
      if (irand(0, 3) == 0) continue;
      const int c = irand(-4, 4);
      if (c != 0) terms.push_back({static_cast<std::size_t>(j), double(c)});
    }
    const int r = irand(0, 19);
    const Relation rel = r < 13 ? Relation::LessEqual : r < 17 ? Relation::GreaterEqual : Relation::Equal;
    lp.add_row("r" + std::to_string(i), std::move(terms), rel, irand(-8, 12));
  }
  return lp;
}

DualCheck dual_value(const LinearProgram& lp, const std::vector<double>& duals) {
  DualCheck d;
  const std::size_t n = lp.num_vars();
  std::vector<double> reduced = lp.objective;
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const double y = duals[i];
    const auto& row = lp.rows[i];
    if (row.rel == Relation::LessEqual) d.sign_violation = std::max(d.sign_violation, -y);
    if (row.rel == Relation::GreaterEqual) d.sign_violation = std::max(d.sign_violation, y);
    d.dual_objective += y * row.rhs;
    for (const auto& t : row.terms) reduced[t.var] -= y * t.coef;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double r = reduced[j];
    if (std::abs(r) <= 1e-9) continue;
    const double bound = r > 0 ? lp.upper[j] : lp.lower[j];
    if (!std::isfinite(bound)) {
      d.reduced_cost_on_infinite_bound = true;
      continue;
    }
    d.dual_objective += r * bound;
  }
  return d;
}

// --- schedules --------------------------------------------------------------

ptx::ScheduleProblem tiny_schedule_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  auto irand = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  ptx::ScheduleProblem p;
  p.step_s = 60.0;  // ramp per step equals the per-minute rate
  p.horizon_steps = static_cast<std::size_t>(irand(1, 3));
  auto& topo = p.topology;
  topo.turbine.count = 1;
  topo.modules.clear();
  for (int m = 0; m < 2; ++m) {
    ptx::ConversionModuleParams mod;
    mod.name = m == 0 ? "syn_a" : "syn_b";
    mod.kind = ptx::ModuleKind::Synthesis;
    mod.product = ptx::Species::Methanol;
    mod.p_max_kw = irand(3, 9);
    mod.p_min_frac = 0.0;
    mod.ramp_kw_per_min = irand(1, 6);
    mod.specific_energy_kwh_per_kg = 0.5 * irand(1, 4);
    topo.modules.push_back(mod);
  }
  // Capacity small enough to bind on some instances.
  const double h = p.step_s / 3600.0;
  const double full = h * p.horizon_steps * 18.0;
  topo.storages = {{"methanol_tank", ptx::Species::Methanol, full * 0.1 * irand(2, 9), 0.0, 0.0}};
  p.initial_levels = {topo.storages[0].capacity * 0.1 * irand(0, 5)};
  topo.storages[0].initial_level = p.initial_levels[0];
  // Within one ramp of zero so the all-off plan stays reachable.
  auto init = [&](const ptx::ConversionModuleParams& m) {
    return double(irand(0, int(std::min(m.p_max_kw, m.ramp_kw_per_min))));
  };
  p.initial_loads_kw = {init(topo.modules[0]), init(topo.modules[1])};
  for (std::size_t t = 0; t < p.horizon_steps; ++t) p.power_forecast_kw.push_back(irand(0, 16));
  p.weights.lambda_curtail = 0.01;
  p.weights.lambda_terminal = {0.05};
  return p;
}

double tiny_objective(const ptx::ScheduleProblem& p, const std::vector<std::vector<double>>& loads) {
  const double h = p.step_s / 3600.0;
  double obj = 0.0;
  double level = p.initial_levels[0];
  for (std::size_t t = 0; t < p.horizon_steps; ++t) {
    double used = 0.0;
    for (std::size_t m = 0; m < loads.size(); ++m) {
      const double kg = loads[m][t] * h / p.topology.modules[m].specific_energy_kwh_per_kg;
      obj += kg;
      level += kg;
      used += loads[m][t];
    }
    obj -= p.weights.lambda_curtail * h * (p.power_forecast_kw[t] - used);
  }
  return obj + p.weights.lambda_terminal[0] * level;
}

GridResult grid_search(const ptx::ScheduleProblem& p) {
  const std::size_t T = p.horizon_steps;
  const auto& mods = p.topology.modules;
  const double h = p.step_s / 3600.0;
  const double cap = p.topology.storages[0].capacity;
  GridResult best;
  std::vector<std::vector<double>> loads(2, std::vector<double>(T, 0.0));
  // Depth-first over (step, module), pruning on power, ramp and capacity.
  std::function<void(std::size_t, std::size_t, double, double)> rec =
      [&](std::size_t t, std::size_t m, double used, double level) {
        if (t == T) {
          const double obj = tiny_objective(p, loads);
          if (!best.feasible || obj > best.objective) {
            best.feasible = true;
            best.objective = obj;
            best.loads = loads;
          }
          return;
        }
        const auto& mod = mods[m];
        const double prev = t == 0 ? p.initial_loads_kw[m] : loads[m][t - 1];
        const double r = mod.ramp_kw_per_min * p.step_s / 60.0;
        for (int kw = 0; kw <= int(mod.p_max_kw); ++kw) {
          if (std::abs(kw - prev) > r) continue;
          if (used + kw > p.power_forecast_kw[t]) break;
          const double nl = level + kw * h / mod.specific_energy_kwh_per_kg;
          if (m == 1 && nl > cap * (1 + 1e-12)) break;
          loads[m][t] = kw;
          if (m == 0) {
            rec(t, 1, used + kw, nl);
          } else {
            rec(t + 1, 0, 0.0, nl);
          }
        }
        loads[m][t] = 0.0;
      };
  rec(0, 0, 0.0, p.initial_levels[0]);
  return best;
}

double discretization_bound(const ptx::ScheduleProblem& p) {
  const double h = p.step_s / 3600.0;
  double b = 0.0;
  for (const auto& mod : p.topology.modules) {
    const double per_kw = h / mod.specific_energy_kwh_per_kg * (1.0 + p.weights.lambda_terminal[0]) +
                          p.weights.lambda_curtail * h;
    b += per_kw * 1.0 * p.horizon_steps;
  }
  return b;
}

ptx::ScheduleProblem random_schedule_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 104729 + 3);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto irand = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  ptx::ScheduleProblem p;
  p.topology = ptx::default_topology();
  auto& topo = p.topology;
  topo.turbine.count = irand(1, 6);
  for (auto& m : topo.modules) {
    m.p_max_kw *= uni(0.5, 1.5);
    m.ramp_kw_per_min *= uni(0.5, 1.5);
  }
  for (auto& st : topo.storages) {
    st.capacity *= uni(0.5, 2.0);
    st.initial_level = uni(0.0, 1.0) * st.capacity;
  }
  p.horizon_steps = static_cast<std::size_t>(irand(4, 48));
  p.step_s = 900.0;
  for (const auto& st : topo.storages) p.initial_levels.push_back(st.initial_level);
  for (const auto& m : topo.modules) {
    p.initial_loads_kw.push_back(irand(0, 1) ? uni(0.0, m.p_max_kw) : 0.0);
  }
  // AR(1) wind through the curve.
  double v = uni(2.0, 16.0);
  const double mu = uni(4.0, 14.0), rho = uni(0.8, 0.99), sig = uni(1.0, 5.0);
  std::normal_distribution<double> z;
  for (std::size_t t = 0; t < p.horizon_steps; ++t) {
    v = mu + rho * (v - mu) + sig * std::sqrt(1 - rho * rho) * z(rng);
    p.power_forecast_kw.push_back(reference_power_kw(std::max(0.0, v), topo.turbine));
  }
  if (irand(0, 2) == 0) {
    ptx::ShipWindow w;
    w.first_step = static_cast<std::size_t>(irand(0, int(p.horizon_steps) - 1));
    w.end_step = std::min(p.horizon_steps, w.first_step + static_cast<std::size_t>(irand(1, 16)));
    w.offtake_capacity[ptx::idx(ptx::Species::Methanol)] = irand(0, 1) ? ptx::kInf : uni(1e3, 1e5);
    w.delivery_capacity[ptx::idx(ptx::Species::CO2)] = uni(1e4, 6e5);
    p.ships.push_back(w);
  }
  if (irand(0, 3) == 0) {
    ptx::MaintenanceWindow mw;
    mw.module = static_cast<std::size_t>(irand(0, 2));
    mw.first_step = static_cast<std::size_t>(irand(0, int(p.horizon_steps) - 1));
    mw.end_step = std::min(p.horizon_steps, mw.first_step + static_cast<std::size_t>(irand(1, 8)));
    p.maintenance.push_back(mw);
  }
  if (irand(0, 3) == 0) {
    ptx::Pin pin;
    pin.module = static_cast<std::size_t>(irand(0, 2));
    pin.first_step = 0;
    pin.end_step = p.horizon_steps;
    pin.load_kw = uni(0.0, topo.modules[pin.module].p_max_kw * 0.5);
    p.pins.push_back(pin);
  }
  return p;
}

// --- runs -------------------------------------------------------------------

double reference_power_kw(double v, const ptx::TurbineParams& t) {
  if (v < t.cut_in_mps || v >= t.cut_out_mps) return 0.0;
  if (v >= t.rated_speed_mps) return t.count * t.rated_power_kw;
  // Cubic between cut-in and rated.
  const double num = std::pow(v, 3) - std::pow(t.cut_in_mps, 3);
  const double den = std::pow(t.rated_speed_mps, 3) - std::pow(t.cut_in_mps, 3);
  return t.count * t.rated_power_kw * num / den;
}

std::vector<std::string> conservation_failures(const ptx::RunReport& r, double rel_tol) {
  using ptx::idx;
  using ptx::Species;
  std::vector<std::string> bad;
  const auto& topo = r.scenario.topology;
  const double dt = r.scenario.dt_sim_s;
  auto check = [&](bool ok, std::size_t tick, const std::string& what, double residual) {
    if (ok || bad.size() >= 20) return;
    std::ostringstream os;
    os << "tick " << tick << ": " << what << " residual " << residual;
    bad.push_back(os.str());
  };
  auto close = [&](double a, double b, double scale) {
    return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b), scale});
  };
  if (r.states.size() != r.ticks.size()) {
    bad.push_back("run was not recorded with per-tick states");
    return bad;
  }
  std::vector<int> where(ptx::kSpeciesCount, -1);
  for (std::size_t k = 0; k < topo.storages.size(); ++k) where[idx(topo.storages[k].species)] = int(k);

  ptx::PerSpecies<double> sum_in{}, sum_out{};
  const ptx::PlantState* prev = &r.initial_state;
  for (std::size_t i = 0; i < r.ticks.size(); ++i) {
    const auto& row = r.ticks[i];
    const auto& f = row.flows;
    const auto& st = r.states[i];

    // Stoichiometry from the parameters.
    ptx::PerSpecies<double> prod{}, cons{}, vent{};
    double used_kwh = 0.0;
    for (std::size_t m = 0; m < topo.modules.size(); ++m) {
      const auto& mod = topo.modules[m];
      const double e = f.module_energy_kwh[m];
      used_kwh += e;
      const double kg = e / mod.specific_energy_kwh_per_kg;
      check(close(kg, f.module_production_kg[m], kg), i, mod.name + " production vs energy",
            kg - f.module_production_kg[m]);
      prod[idx(mod.product)] += f.module_production_kg[m];
      for (const auto& fd : mod.feeds) cons[idx(fd.species)] += fd.kg_per_kg * f.module_production_kg[m];
      for (const auto& bp : mod.byproducts) {
        (where[idx(bp.species)] >= 0 ? prod : vent)[idx(bp.species)] += bp.kg_per_kg * f.module_production_kg[m];
      }
    }
    for (ptx::Species s : ptx::kAllSpecies) {
      if (s == Species::Electricity) continue;
      const auto k = idx(s);
      check(close(prod[k], f.produced[k], prod[k]), i, "produced " + std::string(ptx::to_string(s)),
            prod[k] - f.produced[k]);
      check(close(cons[k], f.consumed[k], cons[k]), i, "consumed " + std::string(ptx::to_string(s)),
            cons[k] - f.consumed[k]);
      check(close(vent[k], f.vented[k], vent[k]), i, "vented " + std::string(ptx::to_string(s)),
            vent[k] - f.vented[k]);
    }

    // Storage balance.
    for (std::size_t k = 0; k < topo.storages.size(); ++k) {
      const auto s = idx(topo.storages[k].species);
      const double in = f.produced[s] + f.delivered[s];
      const double out = f.consumed[s] + f.offtake[s];
      const double lhs = st.levels[k] - prev->levels[k];
      check(close(lhs, in - out, std::max({in, out, prev->levels[k]})), i,
            "mass balance of " + topo.storages[k].name, lhs - (in - out));
      check(st.levels[k] >= -rel_tol * topo.storages[k].capacity &&
                st.levels[k] <= topo.storages[k].capacity * (1 + rel_tol),
            i, "level bounds of " + topo.storages[k].name, st.levels[k]);
    }

    // Energy: available + discharge = used + curtailed + charge.
    const double charge = f.produced[idx(Species::Electricity)] * 3600.0 / dt;
    const double discharge = f.consumed[idx(Species::Electricity)] * 3600.0 / dt;
    const double used_kw = used_kwh * 3600.0 / dt;
    const double avail = reference_power_kw(row.wind_mps, topo.turbine);
    check(close(avail, row.available_kw, avail), i, "available power vs curve", avail - row.available_kw);
    check(close(used_kw, row.used_kw, used_kw), i, "used power", used_kw - row.used_kw);
    const double lhs = row.available_kw + discharge;
    const double rhs = row.used_kw + row.curtailed_kw + charge;
    check(close(lhs, rhs, lhs), i, "energy accounting", lhs - rhs);
    check(row.curtailed_kw >= 0.0, i, "negative curtailment", row.curtailed_kw);

    for (std::size_t s = 0; s < ptx::kSpeciesCount; ++s) {
      sum_in[s] += f.produced[s] + f.delivered[s];
      sum_out[s] += f.consumed[s] + f.offtake[s];
    }
    prev = &st;
  }

  // Whole-run balance, summed independently of the harness totals.
  for (std::size_t k = 0; k < topo.storages.size(); ++k) {
    const auto s = idx(topo.storages[k].species);
    const double lhs = r.final_state.levels[k] - r.initial_state.levels[k];
    const double rhs = sum_in[s] - sum_out[s];
    check(close(lhs, rhs, std::max({sum_in[s], sum_out[s], r.initial_state.levels[k]})), r.ticks.size(),
          "run mass balance of " + topo.storages[k].name, lhs - rhs);
  }
  return bad;
}

}  // namespace oracle
