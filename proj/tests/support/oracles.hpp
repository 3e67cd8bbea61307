#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. Nothing in here calls into the solver or the plant step code it is
// meant to check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ptx/harness.hpp"
#include "ptx/lp.hpp"
#include "ptx/scheduler.hpp"

namespace oracle {

// --- LP ---------------------------------------------------------------------

struct VertexResult {
  ptx::LpStatus status = ptx::LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

// Brute-force vertex enumeration. Infinite bounds are replaced by a box of
// half-width `box`; an optimum that keeps growing when the box is doubled is
// classified Unbounded.
VertexResult enumerate_vertices(const ptx::LinearProgram& lp, double box = 1e6);

// Small LP with integer data: 1..6 variables, 1..6 rows, mixed relations,
// mostly finite bounds (some instances have free or half-infinite variables).
ptx::LinearProgram random_small_lp(std::mt19937_64& rng);

struct DualCheck {
  double dual_objective = 0.0;
  double sign_violation = 0.0;   // wrong-signed row multipliers
  bool reduced_cost_on_infinite_bound = false;
};

// Lagrangian dual value of the given row multipliers (maximisation sign
// convention), computed from the problem data alone.
DualCheck dual_value(const ptx::LinearProgram& lp, const std::vector<double>& duals);

// --- schedules --------------------------------------------------------------

// Two methanol producers feeding one tank, 1..3 steps, integer loads and ramps
// so the 1 kW grid contains the rounded-down LP optimum.
ptx::ScheduleProblem tiny_schedule_problem(std::uint64_t seed);

struct GridResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<std::vector<double>> loads;  // [module][step]
};

// Exhaustive search over integer kW loads for tiny_schedule_problem instances.
GridResult grid_search(const ptx::ScheduleProblem& p);

// Objective of a load plan evaluated from the problem data (only valid for
// single-storage methanol problems without ships or pins).
double tiny_objective(const ptx::ScheduleProblem& p, const std::vector<std::vector<double>>& loads);

// Upper bound on objective loss from rounding every load down to the 1 kW grid.
double discretization_bound(const ptx::ScheduleProblem& p);

// Realistic instance: default chain with random sizes, forecast from a random
// wind path, optional ship call, maintenance and pins.
ptx::ScheduleProblem random_schedule_problem(std::uint64_t seed);

// --- runs -------------------------------------------------------------------

// Per-tick species and energy accounting of a run recorded with
// record_states. Returns human-readable failures (empty = conserved).
// Stoichiometry is recomputed from the module parameters.
std::vector<std::string> conservation_failures(const ptx::RunReport& r, double rel_tol = 1e-9);

// Turbine power curve written out from its definition.
double reference_power_kw(double v, const ptx::TurbineParams& t);

}  // namespace oracle
