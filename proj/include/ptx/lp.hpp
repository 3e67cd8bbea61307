#pragma once

// Linear programs and a two-phase bounded primal simplex solver with two
// engines: a dense tableau (reference, small problems) and a sparse revised
// form with an LU-factored basis (large problems).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ptx/kernels.hpp"

namespace ptx {

enum class Relation : std::uint8_t { LessEqual, Equal, GreaterEqual };
std::string_view to_string(Relation r);

struct LpTerm {
  std::size_t var;
  double coef;
};

struct LpRow {
  std::string name;
  std::vector<LpTerm> terms;
  Relation rel = Relation::LessEqual;
  double rhs = 0.0;
};

// maximize objective . x  subject to rows and lower <= x <= upper.
// Bounds may be +-infinity.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> var_names;
  std::vector<LpRow> rows;

  std::size_t num_vars() const { return objective.size(); }
  std::size_t add_variable(std::string name, double lo, double hi, double cost = 0.0);
  std::size_t add_row(std::string name, std::vector<LpTerm> terms, Relation rel, double rhs);
};

// Throws ContractViolation on inconsistent dimensions, NaN data or bad indices.
void validate(const LinearProgram& lp);

enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded, IterationLimit };
std::string_view to_string(LpStatus s);

enum class PivotRule : std::uint8_t {
  Bland,              // smallest-index entering and leaving variable throughout
  DantzigThenBland,   // largest reduced cost; falls back to Bland for good after a
                      // run of degenerate pivots, which keeps the termination guarantee
};

enum class LpMethod : std::uint8_t {
  Auto,          // revised for problems with >= 40 rows, tableau otherwise
  DenseTableau,
  Revised,
};

struct LpOptions {
  double tol = 1e-7;
  LpMethod method = LpMethod::Auto;
  std::size_t refactor_interval = 64;  // revised: basis updates between refactorizations
  PivotRule rule = PivotRule::DantzigThenBland;
  std::size_t max_iterations = 0;  // 0 = 50 * (rows + columns) of the standard form
  std::size_t degenerate_switch = 64;
  kernels::Backend backend = kernels::default_backend();
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> duals;  // one per row, sign convention of a maximisation
  double dual_objective = 0.0;
  std::size_t iterations = 0;
  double max_row_violation = 0.0;
  double max_bound_violation = 0.0;
  LpMethod method = LpMethod::DenseTableau;  // engine that produced the result
};

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

double lp_objective(const LinearProgram& lp, const std::vector<double>& x);
// Largest violation over all rows (absolute).
double lp_row_violation(const LinearProgram& lp, const std::vector<double>& x);
double lp_bound_violation(const LinearProgram& lp, const std::vector<double>& x);

// Plain-text dump format (see docs in lp_text.cpp):
//   lp <nvars> <nrows>
//   var <name> <lower> <upper> <cost>
//   row <name> <le|eq|ge> <rhs> <nterms> <var-index> <coef> ...
// Infinite bounds are written as inf / -inf, numbers round-trip exactly.
std::string to_text(const LinearProgram& lp);
LinearProgram lp_from_text(std::string_view text);

}  // namespace ptx
