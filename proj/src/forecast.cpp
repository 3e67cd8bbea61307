#include "ptx/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "ptx/error.hpp"

namespace ptx {

void validate(const ClimatologyParams& p) {
  if (!(p.sigma_inf >= 0.0)) throw ValidationError("climatology.sigma_inf >= 0");
  if (!(p.rho >= 0.0 && p.rho <= 1.0)) throw ValidationError("climatology.rho in [0,1]");
  if (!std::isfinite(p.mu)) throw ValidationError("climatology.mu must be finite");
}

ClimatologyParams fit_climatology(std::span<const double> history) {
  const std::size_t n = history.size();
  if (n < 10) {
    throw InsufficientHistory("fit_climatology: need >= 10 samples, got " + std::to_string(n));
  }
  double mean = 0.0;
  for (double v : history) mean += v;
  mean /= static_cast<double>(n);

  double ss = 0.0;
  double lag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = history[i] - mean;
    ss += d * d;
    if (i + 1 < n) lag += d * (history[i + 1] - mean);
  }
  ClimatologyParams p;
  p.mu = mean;
  p.sigma_inf = std::sqrt(ss / static_cast<double>(n - 1));
  // 0/0 for a constant series is taken as 0
  p.rho = ss > 0.0 ? std::clamp(lag / ss, 0.0, 1.0) : 0.0;
  return p;
}

ForecastEnsemble forecast_wind(double v_now, const ClimatologyParams& p,
                               std::size_t horizon_steps, std::size_t n_scenarios,
                               std::uint64_t seed, double issued_at_s, double step_s,
                               std::vector<double> levels, kernels::Backend backend) {
  if (n_scenarios < 1) throw ContractViolation("forecast_wind: n_scenarios >= 1");
  validate(p);
  ForecastEnsemble e;
  e.issued_at_s = issued_at_s;
  e.step_s = step_s;
  e.horizon_steps = horizon_steps;
  e.n_scenarios = n_scenarios;
  e.quantile_levels = std::move(levels);

  e.mean_path.resize(horizon_steps);
  double decay = 1.0;
  for (std::size_t k = 0; k < horizon_steps; ++k) {
    decay *= p.rho;
    e.mean_path[k] = p.rho == 1.0 ? v_now : p.mu + (v_now - p.mu) * decay;
  }
  e.scenarios.resize(n_scenarios * horizon_steps);
  kernels::ar1_scenarios(backend, e.mean_path, p.sigma_inf, p.rho, n_scenarios, seed, e.scenarios);
  e.quantiles.resize(e.quantile_levels.size() * horizon_steps);
  kernels::column_quantiles(backend, e.scenarios, n_scenarios, horizon_steps, e.quantile_levels,
                            e.quantiles);
  return e;
}

std::span<const double> PowerEnsemble::quantile_at(double level) const {
  for (std::size_t l = 0; l < quantile_levels.size(); ++l) {
    if (quantile_levels[l] == level) return quantile_row(l);
  }
  throw ContractViolation("quantile level " + std::to_string(level) + " not in ensemble");
}

PowerEnsemble wind_to_power(const ForecastEnsemble& e, const TurbineParams& t,
                            kernels::Backend backend) {
  PowerEnsemble pe;
  pe.issued_at_s = e.issued_at_s;
  pe.step_s = e.step_s;
  pe.horizon_steps = e.horizon_steps;
  pe.n_scenarios = e.n_scenarios;
  pe.quantile_levels = e.quantile_levels;
  pe.scenarios_kw.resize(e.scenarios.size());
  kernels::power_matrix(backend, e.scenarios, pe.scenarios_kw, t);
  pe.quantiles_kw.resize(pe.quantile_levels.size() * pe.horizon_steps);
  kernels::column_quantiles(backend, pe.scenarios_kw, pe.n_scenarios, pe.horizon_steps,
                            pe.quantile_levels, pe.quantiles_kw);
  return pe;
}

}  // namespace ptx
