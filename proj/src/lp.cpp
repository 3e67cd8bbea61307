#include "ptx/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ptx/error.hpp"

namespace ptx {

namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;

}  // namespace

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::LessEqual: return "le";
    case Relation::Equal: return "eq";
    case Relation::GreaterEqual: return "ge";
  }
  return "?";
}

std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
  }
  return "?";
}

std::size_t LinearProgram::add_variable(std::string name, double lo, double hi, double cost) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  var_names.push_back(std::move(name));
  return objective.size() - 1;
}

std::size_t LinearProgram::add_row(std::string name, std::vector<LpTerm> terms, Relation rel,
                                   double rhs) {
  rows.push_back(LpRow{std::move(name), std::move(terms), rel, rhs});
  return rows.size() - 1;
}

void validate(const LinearProgram& lp) {
  const std::size_t n = lp.objective.size();
  if (lp.lower.size() != n || lp.upper.size() != n) {
    throw ContractViolation("LinearProgram: bound vectors must match objective length");
  }
  if (!lp.var_names.empty() && lp.var_names.size() != n) {
    throw ContractViolation("LinearProgram: var_names must match objective length");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(lp.objective[j]) || std::isnan(lp.lower[j]) || std::isnan(lp.upper[j]) ||
        lp.lower[j] == kInfD || lp.upper[j] == -kInfD) {
      throw ContractViolation("LinearProgram: bad data for variable " + std::to_string(j));
    }
  }
  for (const auto& r : lp.rows) {
    if (!std::isfinite(r.rhs)) throw ContractViolation("LinearProgram: row '" + r.name + "' rhs");
    for (const auto& t : r.terms) {
      if (t.var >= n || !std::isfinite(t.coef)) {
        throw ContractViolation("LinearProgram: row '" + r.name + "' has a bad term");
      }
    }
  }
}

double lp_objective(const LinearProgram& lp, const std::vector<double>& x) {
  double z = 0.0;
  for (std::size_t j = 0; j < lp.objective.size(); ++j) z += lp.objective[j] * x[j];
  return z;
}

double lp_row_violation(const LinearProgram& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (const auto& r : lp.rows) {
    double a = 0.0;
    for (const auto& t : r.terms) a += t.coef * x[t.var];
    double v = 0.0;
    switch (r.rel) {
      case Relation::LessEqual: v = a - r.rhs; break;
      case Relation::GreaterEqual: v = r.rhs - a; break;
      case Relation::Equal: v = std::abs(a - r.rhs); break;
    }
    worst = std::max(worst, v);
  }
  return worst;
}

double lp_bound_violation(const LinearProgram& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    worst = std::max({worst, lp.lower[j] - x[j], x[j] - lp.upper[j]});
  }
  return worst;
}

namespace {

// How a standard-form column maps back to an original variable:
// x_orig += sign * x_col, plus the base offset recorded per variable.
struct ColumnOrigin {
  std::size_t var;
  double sign;
};

using SparseCol = std::vector<std::pair<std::size_t, double>>;  // (row, value)

// Raised by the revised engine when its basis factorization breaks down; the
// caller then re-solves with the dense tableau.
struct NumericalTrouble {};

// LU factors of a basis: rows peeled off as row singletons (solved first),
// columns peeled off as column singletons (solved last) and a dense nucleus
// in between, plus a product-form eta file for the updates since then.
class BasisFactor {
 public:
  void factor(const std::vector<const SparseCol*>& cols, std::size_t m);
  // x = B^-1 a, a given dense over rows, result dense over basis slots.
  void ftran(std::vector<double>& r, std::vector<double>& x) const;
  // y = B^-T c, c dense over slots (destroyed), y dense over rows.
  void btran(std::vector<double>& c, std::vector<double>& y) const;
  void push_eta(std::size_t slot, const std::vector<double>& alpha);
  std::size_t etas() const { return eta_slot_.size(); }

 private:
  struct Pivot {
    std::size_t row;
    std::size_t slot;
    double value;
  };
  std::size_t m_ = 0;
  std::vector<const SparseCol*> cols_;
  std::vector<Pivot> row_piv_;  // row singletons, in solve order
  std::vector<Pivot> col_piv_;  // column singletons, solved in reverse
  std::vector<std::size_t> nrows_, nslots_;
  std::vector<double> lu_;        // nucleus, row-major, L unit-diagonal below
  std::vector<std::size_t> perm_;  // nucleus row permutation
  // Non-zeros of the nucleus factors: row a of L (b < a), row a of U (b > a)
  // and column a of each (for the transposed solves).
  std::vector<SparseCol> l_rows_, u_rows_, l_cols_, u_cols_;
  std::vector<double> u_diag_;
  std::vector<std::size_t> eta_slot_;
  std::vector<double> eta_piv_;
  std::vector<SparseCol> eta_col_;  // off-pivot entries
  mutable std::vector<double> work_;
};

void BasisFactor::factor(const std::vector<const SparseCol*>& cols, std::size_t m) {
  m_ = m;
  cols_ = cols;
  row_piv_.clear();
  col_piv_.clear();
  nrows_.clear();
  nslots_.clear();
  eta_slot_.clear();
  eta_piv_.clear();
  eta_col_.clear();

  std::vector<std::vector<std::size_t>> row_slots(m);
  std::vector<std::size_t> cc(m, 0), rc(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    for (const auto& [i, v] : *cols[k]) {
      row_slots[i].push_back(k);
      ++cc[k];
      ++rc[i];
    }
  }
  std::vector<bool> row_on(m, true), slot_on(m, true);
  auto value_at = [&](std::size_t i, std::size_t k) {
    for (const auto& [r, v] : *cols[k]) {
      if (r == i) return v;
    }
    return 0.0;
  };

  // Column singletons.
  std::vector<std::size_t> stack;
  for (std::size_t k = 0; k < m; ++k) {
    if (cc[k] == 1) stack.push_back(k);
  }
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    if (!slot_on[k] || cc[k] != 1) continue;
    std::size_t row = m;
    double v = 0.0;
    for (const auto& [i, a] : *cols[k]) {
      if (row_on[i]) {
        row = i;
        v = a;
        break;
      }
    }
    if (row == m || std::abs(v) < 1e-11) throw NumericalTrouble{};
    col_piv_.push_back({row, k, v});
    slot_on[k] = false;
    row_on[row] = false;
    for (std::size_t k2 : row_slots[row]) {
      if (slot_on[k2] && --cc[k2] == 1) stack.push_back(k2);
    }
  }
  // Row singletons on what is left.
  std::fill(rc.begin(), rc.end(), 0);
  for (std::size_t k = 0; k < m; ++k) {
    if (!slot_on[k]) continue;
    for (const auto& [i, a] : *cols[k]) {
      if (row_on[i]) ++rc[i];
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (row_on[i] && rc[i] == 1) stack.push_back(i);
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (!row_on[i] || rc[i] != 1) continue;
    std::size_t slot = m;
    for (std::size_t k : row_slots[i]) {
      if (slot_on[k]) {
        slot = k;
        break;
      }
    }
    if (slot == m) throw NumericalTrouble{};
    const double v = value_at(i, slot);
    if (std::abs(v) < 1e-11) throw NumericalTrouble{};
    row_piv_.push_back({i, slot, v});
    row_on[i] = false;
    slot_on[slot] = false;
    for (const auto& [i2, a] : *cols[slot]) {
      if (row_on[i2] && --rc[i2] == 1) stack.push_back(i2);
    }
  }
  // Dense nucleus.
  for (std::size_t i = 0; i < m; ++i) {
    if (row_on[i]) nrows_.push_back(i);
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (slot_on[k]) nslots_.push_back(k);
  }
  if (nrows_.size() != nslots_.size()) throw NumericalTrouble{};
  const std::size_t s = nrows_.size();
  lu_.assign(s * s, 0.0);
  perm_.resize(s);
  if (s > 0) {
    std::vector<std::size_t> pos(m, m);
    for (std::size_t a = 0; a < s; ++a) pos[nrows_[a]] = a;
    for (std::size_t b = 0; b < s; ++b) {
      for (const auto& [i, v] : *cols[nslots_[b]]) {
        if (pos[i] < s) lu_[pos[i] * s + b] = v;
      }
    }
    for (std::size_t a = 0; a < s; ++a) perm_[a] = a;
    double scale = 0.0;
    for (double v : lu_) scale = std::max(scale, std::abs(v));
    for (std::size_t c = 0; c < s; ++c) {
      std::size_t p = c;
      double best = std::abs(lu_[c * s + c]);
      for (std::size_t r = c + 1; r < s; ++r) {
        if (std::abs(lu_[r * s + c]) > best) {
          best = std::abs(lu_[r * s + c]);
          p = r;
        }
      }
      if (best <= 1e-12 * std::max(1.0, scale)) throw NumericalTrouble{};
      if (p != c) {
        std::swap_ranges(lu_.begin() + static_cast<long>(c * s), lu_.begin() + static_cast<long>(c * s + s),
                         lu_.begin() + static_cast<long>(p * s));
        std::swap(perm_[c], perm_[p]);
      }
      const double piv = lu_[c * s + c];
      for (std::size_t r = c + 1; r < s; ++r) {
        double& l = lu_[r * s + c];
        if (l == 0.0) continue;
        l /= piv;
        const double* urow = &lu_[c * s];
        double* row = &lu_[r * s];
        for (std::size_t j = c + 1; j < s; ++j) row[j] -= l * urow[j];
      }
    }
  }
  l_rows_.assign(s, {});
  u_rows_.assign(s, {});
  l_cols_.assign(s, {});
  u_cols_.assign(s, {});
  u_diag_.assign(s, 0.0);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      const double v = lu_[a * s + b];
      if (b == a) {
        u_diag_[a] = v;
      } else if (v != 0.0) {
        if (b < a) {
          l_rows_[a].push_back({b, v});
          l_cols_[b].push_back({a, v});
        } else {
          u_rows_[a].push_back({b, v});
          u_cols_[b].push_back({a, v});
        }
      }
    }
  }
}

void BasisFactor::ftran(std::vector<double>& r, std::vector<double>& x) const {
  x.assign(m_, 0.0);
  for (const auto& p : row_piv_) {
    const double v = r[p.row] / p.value;
    x[p.slot] = v;
    if (v != 0.0) {
      for (const auto& [i, a] : *cols_[p.slot]) r[i] -= a * v;
    }
  }
  const std::size_t s = nrows_.size();
  if (s > 0) {
    auto& z = work_;
    z.resize(s);
    for (std::size_t a = 0; a < s; ++a) z[a] = r[nrows_[perm_[a]]];
    for (std::size_t a = 0; a < s; ++a) {
      double t = z[a];
      for (const auto& [b, v] : l_rows_[a]) t -= v * z[b];
      z[a] = t;
    }
    for (std::size_t a = s; a-- > 0;) {
      double t = z[a];
      for (const auto& [b, v] : u_rows_[a]) t -= v * z[b];
      z[a] = t / u_diag_[a];
    }
    for (std::size_t b = 0; b < s; ++b) {
      const double v = z[b];
      x[nslots_[b]] = v;
      if (v != 0.0) {
        for (const auto& [i, a] : *cols_[nslots_[b]]) r[i] -= a * v;
      }
    }
  }
  for (std::size_t j = col_piv_.size(); j-- > 0;) {
    const auto& p = col_piv_[j];
    const double v = r[p.row] / p.value;
    x[p.slot] = v;
    if (v != 0.0) {
      for (const auto& [i, a] : *cols_[p.slot]) r[i] -= a * v;
    }
  }
  for (std::size_t e = 0; e < eta_slot_.size(); ++e) {
    const std::size_t ps = eta_slot_[e];
    const double v = x[ps] / eta_piv_[e];
    x[ps] = v;
    if (v != 0.0) {
      for (const auto& [k, a] : eta_col_[e]) x[k] -= a * v;
    }
  }
}

void BasisFactor::btran(std::vector<double>& c, std::vector<double>& y) const {
  for (std::size_t e = eta_slot_.size(); e-- > 0;) {
    const std::size_t ps = eta_slot_[e];
    double t = c[ps];
    for (const auto& [k, a] : eta_col_[e]) t -= a * c[k];
    c[ps] = t / eta_piv_[e];
  }
  y.assign(m_, 0.0);
  auto dot = [&](std::size_t slot) {
    double t = 0.0;
    for (const auto& [i, a] : *cols_[slot]) t += a * y[i];
    return t;
  };
  for (const auto& p : col_piv_) y[p.row] = (c[p.slot] - dot(p.slot)) / p.value;
  const std::size_t s = nrows_.size();
  if (s > 0) {
    // (P N)^T = U^T L^T with P N = L U:  N^T y_N = rhs.
    auto& z = work_;
    z.resize(s);
    for (std::size_t b = 0; b < s; ++b) z[b] = c[nslots_[b]] - dot(nslots_[b]);
    for (std::size_t a = 0; a < s; ++a) {
      double t = z[a];
      for (const auto& [b, v] : u_cols_[a]) t -= v * z[b];
      z[a] = t / u_diag_[a];
    }
    for (std::size_t a = s; a-- > 0;) {
      double t = z[a];
      for (const auto& [b, v] : l_cols_[a]) t -= v * z[b];
      z[a] = t;
    }
    for (std::size_t a = 0; a < s; ++a) y[nrows_[perm_[a]]] = z[a];
  }
  for (std::size_t j = row_piv_.size(); j-- > 0;) {
    const auto& p = row_piv_[j];
    y[p.row] = (c[p.slot] - dot(p.slot)) / p.value;
  }
}

void BasisFactor::push_eta(std::size_t slot, const std::vector<double>& alpha) {
  SparseCol col;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (k != slot && alpha[k] != 0.0) col.push_back({k, alpha[k]});
  }
  eta_slot_.push_back(slot);
  eta_piv_.push_back(alpha[slot]);
  eta_col_.push_back(std::move(col));
}

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const LpOptions& opts, bool revised)
      : lp_(lp), opts_(opts), revised_(revised) {}

  LpSolution run();

 private:
  enum class Step { Continue, Optimal, Unbounded };

  bool standardize();
  void price(const std::vector<double>& cost);
  void refactor();
  void column(std::size_t q);
  Step iterate(const std::vector<double>& cost);
  std::size_t choose_entering() const;

  const LinearProgram& lp_;
  LpOptions opts_;
  bool revised_;

  std::size_t m_ = 0;        // rows
  std::size_t n_ = 0;        // columns
  std::size_t n_struct_ = 0;
  std::vector<ColumnOrigin> origin_;  // structural columns only
  std::vector<double> base_;          // per original var
  std::vector<double> ub_;            // per column (lower is 0)
  std::vector<double> cost2_;         // phase-2 cost per column
  std::vector<char> artificial_;
  std::vector<SparseCol> cols_;       // standardized, scaled columns
  std::vector<double> b_;             // standardized rhs
  std::vector<double> tab_;           // dense engine: m x n
  std::vector<double> d_;             // reduced costs z_j - c_j
  std::vector<double> y_;             // revised engine: simplex multipliers
  std::vector<double> beta_;          // basic values
  std::vector<double> alpha_;         // entering column in the current basis
  std::vector<std::size_t> basis_;    // column basic in each row
  std::vector<char> is_basic_;
  std::vector<char> at_upper_;
  std::vector<std::size_t> init_col_;  // identity column of each row in the initial tableau
  std::vector<double> row_scale_;      // standardized row = scale * original row
  std::vector<std::size_t> scratch_;
  std::vector<double> work_;
  BasisFactor lu_;
  bool bland_ = false;
  std::size_t degenerate_run_ = 0;
  std::size_t iterations_ = 0;
  double bmax_ = 0.0;
};

bool Simplex::standardize() {
  const std::size_t nv = lp_.num_vars();
  base_.assign(nv, 0.0);
  std::vector<std::size_t> first_col(nv);
  std::vector<double> col_ub;
  for (std::size_t j = 0; j < nv; ++j) {
    const double lo = lp_.lower[j];
    const double hi = lp_.upper[j];
    if (lo > hi) return false;
    first_col[j] = origin_.size();
    if (std::isfinite(lo)) {
      base_[j] = lo;
      origin_.push_back({j, 1.0});
      col_ub.push_back(hi - lo);
    } else if (std::isfinite(hi)) {
      base_[j] = hi;
      origin_.push_back({j, -1.0});
      col_ub.push_back(kInfD);
    } else {
      origin_.push_back({j, 1.0});
      col_ub.push_back(kInfD);
      origin_.push_back({j, -1.0});
      col_ub.push_back(kInfD);
    }
  }
  n_struct_ = origin_.size();
  m_ = lp_.rows.size();

  // Row data in standardized columns, plus rhs after shifting.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(m_);
  std::vector<double> rhs(m_);
  std::vector<std::size_t> col_count(n_struct_, 0);
  for (std::size_t i = 0; i < m_; ++i) {
    const auto& r = lp_.rows[i];
    double b = r.rhs;
    for (const auto& t : r.terms) {
      if (t.coef == 0.0) continue;
      b -= t.coef * base_[t.var];
      const std::size_t c0 = first_col[t.var];
      rows[i].push_back({c0, origin_[c0].sign * t.coef});
      if (!std::isfinite(lp_.lower[t.var]) && !std::isfinite(lp_.upper[t.var])) {
        rows[i].push_back({c0 + 1, -t.coef});
      }
    }
    // merge duplicate columns
    std::sort(rows[i].begin(), rows[i].end());
    std::vector<std::pair<std::size_t, double>> merged;
    for (const auto& e : rows[i]) {
      if (!merged.empty() && merged.back().first == e.first) {
        merged.back().second += e.second;
      } else {
        merged.push_back(e);
      }
    }
    std::erase_if(merged, [](const auto& e) { return e.second == 0.0; });
    rows[i] = std::move(merged);
    for (const auto& e : rows[i]) ++col_count[e.first];
    rhs[i] = b;
  }

  // Slack columns, sign flips, initial basis selection.
  std::vector<double> flip(m_, 1.0);
  std::vector<int> slack_col(m_, -1);
  std::vector<double> slack_coef(m_, 0.0);
  std::size_t next = n_struct_;
  for (std::size_t i = 0; i < m_; ++i) {
    const Relation rel = lp_.rows[i].rel;
    if (rel != Relation::Equal) {
      slack_col[i] = static_cast<int>(next++);
      slack_coef[i] = rel == Relation::LessEqual ? 1.0 : -1.0;
    }
    if (rhs[i] < 0.0) flip[i] = -1.0;
  }
  init_col_.assign(m_, 0);
  row_scale_.assign(m_, 1.0);
  std::vector<bool> used(n_struct_, false);
  std::vector<int> art_col(m_, -1);
  for (std::size_t i = 0; i < m_; ++i) {
    const double b = flip[i] * rhs[i];
    if (slack_col[i] >= 0 && flip[i] * slack_coef[i] > 0.0) {
      init_col_[i] = static_cast<std::size_t>(slack_col[i]);
      continue;
    }
    // Crash: a structural singleton column with a compatible coefficient.
    bool crashed = false;
    for (const auto& [c, a] : rows[i]) {
      const double fa = flip[i] * a;
      if (col_count[c] == 1 && !used[c] && fa > kPivotTol && b / fa <= col_ub[c]) {
        used[c] = true;
        init_col_[i] = c;
        row_scale_[i] = flip[i] / fa;
        crashed = true;
        break;
      }
    }
    if (!crashed) {
      art_col[i] = static_cast<int>(next++);
      init_col_[i] = static_cast<std::size_t>(art_col[i]);
    }
    if (!crashed) row_scale_[i] = flip[i];
  }
  for (std::size_t i = 0; i < m_; ++i) {
    if (slack_col[i] >= 0 && init_col_[i] == static_cast<std::size_t>(slack_col[i])) {
      row_scale_[i] = flip[i];
    }
  }
  n_ = next;

  ub_.assign(n_, kInfD);
  std::copy(col_ub.begin(), col_ub.end(), ub_.begin());
  artificial_.assign(n_, false);
  cost2_.assign(n_, 0.0);
  for (std::size_t c = 0; c < n_struct_; ++c) {
    cost2_[c] = origin_[c].sign * lp_.objective[origin_[c].var];
  }
  cols_.assign(n_, {});
  b_.assign(m_, 0.0);
  beta_.assign(m_, 0.0);
  basis_.assign(m_, 0);
  is_basic_.assign(n_, false);
  at_upper_.assign(n_, false);
  bmax_ = 0.0;
  for (std::size_t i = 0; i < m_; ++i) {
    const double s = row_scale_[i];
    for (const auto& [c, a] : rows[i]) {
      if (c != init_col_[i]) cols_[c].push_back({i, s * a});
    }
    if (slack_col[i] >= 0 && init_col_[i] != static_cast<std::size_t>(slack_col[i])) {
      cols_[slack_col[i]].push_back({i, s * slack_coef[i]});
    }
    if (art_col[i] >= 0) artificial_[art_col[i]] = true;
    cols_[init_col_[i]].push_back({i, 1.0});
    b_[i] = s * rhs[i];
    if (b_[i] < 0.0) b_[i] = 0.0;  // -0.0 or roundoff from the crash scaling
    beta_[i] = b_[i];
    basis_[i] = init_col_[i];
    is_basic_[init_col_[i]] = true;
    bmax_ = std::max(bmax_, std::abs(rhs[i]));
  }
  if (revised_) {
    refactor();
  } else {
    tab_.assign(m_ * n_, 0.0);
    for (std::size_t c = 0; c < n_; ++c) {
      for (const auto& [i, a] : cols_[c]) tab_[i * n_ + c] = a;
    }
  }
  return true;
}

// Revised engine: fresh factorization of the current basis and basic values
// recomputed from it, which also washes out drift from the updates.
void Simplex::refactor() {
  std::vector<const SparseCol*> bc(m_);
  for (std::size_t i = 0; i < m_; ++i) bc[i] = &cols_[basis_[i]];
  lu_.factor(bc, m_);
  work_ = b_;
  for (std::size_t j = 0; j < n_; ++j) {
    if (!is_basic_[j] && at_upper_[j] && ub_[j] != 0.0) {
      for (const auto& [i, a] : cols_[j]) work_[i] -= a * ub_[j];
    }
  }
  lu_.ftran(work_, beta_);
}

void Simplex::price(const std::vector<double>& cost) {
  d_.assign(n_, 0.0);
  if (revised_) {
    work_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) work_[i] = cost[basis_[i]];
    lu_.btran(work_, y_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (is_basic_[j]) continue;
      double t = -cost[j];
      for (const auto& [i, a] : cols_[j]) t += y_[i] * a;
      d_[j] = t;
    }
    return;
  }
  for (std::size_t j = 0; j < n_; ++j) d_[j] = -cost[j];
  for (std::size_t i = 0; i < m_; ++i) {
    const double cb = cost[basis_[i]];
    if (cb == 0.0) continue;
    const double* row = tab_.data() + i * n_;
    for (std::size_t j = 0; j < n_; ++j) d_[j] += cb * row[j];
  }
  for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
}

void Simplex::column(std::size_t q) {
  if (revised_) {
    work_.assign(m_, 0.0);
    for (const auto& [i, a] : cols_[q]) work_[i] = a;
    lu_.ftran(work_, alpha_);
    return;
  }
  alpha_.resize(m_);
  for (std::size_t i = 0; i < m_; ++i) alpha_[i] = tab_[i * n_ + q];
}

std::size_t Simplex::choose_entering() const {
  std::size_t best = n_;
  double best_score = 0.0;
  for (std::size_t j = 0; j < n_; ++j) {
    if (is_basic_[j] || ub_[j] == 0.0) continue;
    const double dj = d_[j];
    const bool improves = at_upper_[j] ? dj > kCostTol : dj < -kCostTol;
    if (!improves) continue;
    if (bland_) return j;
    const double score = std::abs(dj);
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

Simplex::Step Simplex::iterate(const std::vector<double>& cost) {
  if (revised_) price(cost);
  const std::size_t q = choose_entering();
  if (q == n_) return Step::Optimal;
  column(q);

  const double dir = at_upper_[q] ? -1.0 : 1.0;
  double theta = ub_[q];
  std::size_t leave = m_;
  bool leave_to_upper = false;
  double leave_alpha = 0.0;
  for (std::size_t i = 0; i < m_; ++i) {
    const double a = dir * alpha_[i];
    double limit;
    bool to_upper;
    if (a > kPivotTol) {
      limit = std::max(0.0, beta_[i]) / a;
      to_upper = false;
    } else if (a < -kPivotTol && std::isfinite(ub_[basis_[i]])) {
      limit = std::max(0.0, ub_[basis_[i]] - beta_[i]) / -a;
      to_upper = true;
    } else {
      continue;
    }
    bool take;
    if (leave == m_) {
      take = limit <= theta;
    } else if (limit < theta - 1e-12) {
      take = true;
    } else if (limit <= theta + 1e-12) {
      // tie: Bland takes the smallest basic index, otherwise the largest pivot
      take = bland_ ? basis_[i] < basis_[leave] : std::abs(a) > leave_alpha;
    } else {
      take = false;
    }
    if (take) {
      theta = std::min(theta, limit);
      leave = i;
      leave_to_upper = to_upper;
      leave_alpha = std::abs(a);
    }
  }
  if (!std::isfinite(theta)) return Step::Unbounded;

  ++iterations_;
  if (theta <= 1e-12) {
    if (++degenerate_run_ >= opts_.degenerate_switch) bland_ = true;
  } else {
    degenerate_run_ = 0;
  }

  if (leave == m_) {
    // entering variable reaches its own opposite bound
    for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * theta * alpha_[i];
    at_upper_[q] = !at_upper_[q];
    return Step::Continue;
  }

  const double start = at_upper_[q] ? ub_[q] : 0.0;
  for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * theta * alpha_[i];
  const std::size_t out = basis_[leave];
  beta_[leave] = start + dir * theta;
  is_basic_[out] = false;
  at_upper_[out] = leave_to_upper;
  is_basic_[q] = true;
  at_upper_[q] = false;
  basis_[leave] = q;
  if (revised_) {
    if (lu_.etas() + 1 >= opts_.refactor_interval) {
      refactor();
    } else {
      lu_.push_eta(leave, alpha_);
    }
  } else {
    kernels::pivot(opts_.backend, tab_, m_, n_, leave, q, d_, scratch_);
  }
  return Step::Continue;
}

LpSolution Simplex::run() {
  LpSolution sol;
  sol.method = revised_ ? LpMethod::Revised : LpMethod::DenseTableau;
  if (!standardize()) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }
  bland_ = opts_.rule == PivotRule::Bland;
  const std::size_t limit =
      opts_.max_iterations ? opts_.max_iterations : 50 * (m_ + n_) + 50;

  // Phase 1: maximise -sum(artificials).
  bool any_art = false;
  std::vector<double> cost1(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    if (artificial_[j]) {
      cost1[j] = -1.0;
      any_art = true;
    }
  }
  if (any_art) {
    if (!revised_) price(cost1);
    while (true) {
      if (iterations_ >= limit) {
        sol.status = LpStatus::IterationLimit;
        sol.iterations = iterations_;
        return sol;
      }
      const Step s = iterate(cost1);
      if (s == Step::Optimal) break;
      if (s == Step::Unbounded) break;  // cannot happen: phase-1 objective is bounded by 0
    }
    if (revised_) refactor();
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (artificial_[basis_[i]]) infeas += std::max(0.0, beta_[i]);
    }
    if (infeas > 1e-9 * (1.0 + bmax_)) {
      sol.status = LpStatus::Infeasible;
      sol.iterations = iterations_;
      return sol;
    }
    // Artificials are pinned at zero from here on.
    for (std::size_t j = 0; j < n_; ++j) {
      if (artificial_[j]) ub_[j] = 0.0;
    }
  }

  if (opts_.rule == PivotRule::DantzigThenBland) {
    bland_ = false;
    degenerate_run_ = 0;
  }
  if (!revised_) price(cost2_);
  while (true) {
    if (iterations_ >= limit) {
      sol.status = LpStatus::IterationLimit;
      sol.iterations = iterations_;
      return sol;
    }
    const Step s = iterate(cost2_);
    if (s == Step::Optimal) break;
    if (s == Step::Unbounded) {
      sol.status = LpStatus::Unbounded;
      sol.iterations = iterations_;
      return sol;
    }
  }
  if (revised_) {
    refactor();
    price(cost2_);
  }

  // Primal values.
  std::vector<double> colval(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    if (!is_basic_[j] && at_upper_[j]) colval[j] = ub_[j];
  }
  for (std::size_t i = 0; i < m_; ++i) colval[basis_[i]] = beta_[i];
  sol.x = base_;
  for (std::size_t c = 0; c < n_struct_; ++c) {
    sol.x[origin_[c].var] += origin_[c].sign * colval[c];
  }
  // Snap to bounds that were only missed by roundoff.
  for (std::size_t j = 0; j < sol.x.size(); ++j) {
    sol.x[j] = std::clamp(sol.x[j], lp_.lower[j], lp_.upper[j]);
  }
  sol.objective = lp_objective(lp_, sol.x);

  // Duals: the multiplier of each row is the reduced cost of its initial
  // identity column plus that column's cost, mapped back through the scaling.
  sol.duals.assign(m_, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    const std::size_t k = init_col_[i];
    const double yi = revised_ ? y_[i] : d_[k] + cost2_[k];
    sol.duals[i] = yi * row_scale_[i];
  }
  // Dual objective evaluated from the original data: y.b + sum_j bound terms of
  // the reduced costs r_j = c_j - y.A_j.
  std::vector<double> r(lp_.num_vars());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = lp_.objective[j];
  double dual_obj = 0.0;
  for (std::size_t i = 0; i < m_; ++i) {
    dual_obj += sol.duals[i] * lp_.rows[i].rhs;
    for (const auto& t : lp_.rows[i].terms) r[t.var] -= sol.duals[i] * t.coef;
  }
  for (std::size_t j = 0; j < r.size(); ++j) {
    double bound;
    if (r[j] > 0.0) {
      bound = std::isfinite(lp_.upper[j]) ? lp_.upper[j] : sol.x[j];
    } else {
      bound = std::isfinite(lp_.lower[j]) ? lp_.lower[j] : sol.x[j];
    }
    dual_obj += r[j] * bound;
  }
  sol.dual_objective = dual_obj;
  sol.max_row_violation = lp_row_violation(lp_, sol.x);
  sol.max_bound_violation = lp_bound_violation(lp_, sol.x);
  sol.iterations = iterations_;
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opts) {
  validate(lp);
  const bool revised = opts.method == LpMethod::Revised ||
                       (opts.method == LpMethod::Auto && lp.rows.size() >= 40);
  if (revised) {
    try {
      Simplex s(lp, opts, true);
      return s.run();
    } catch (const NumericalTrouble&) {
      // fall through to the dense engine
    }
  }
  Simplex s(lp, opts, false);
  return s.run();
}

}  // namespace ptx
