#pragma once

// Wind-speed and wind-power forecasts with uncertainty. The model is a
// truncated-Gaussian AR(1) around a fitted climatology; the interface (wind
// history in, power scenarios out) is what the scheduler depends on.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ptx/kernels.hpp"
#include "ptx/plant.hpp"

namespace ptx {

struct ClimatologyParams {
  double mu = 10.0;        // m/s
  double sigma_inf = 3.5;  // m/s
  double rho = 0.97;       // lag-1 autocorrelation per forecast step
};

void validate(const ClimatologyParams& p);

// Requires at least 10 samples (InsufficientHistory otherwise).
ClimatologyParams fit_climatology(std::span<const double> history);

struct ForecastEnsemble {
  double issued_at_s = 0.0;
  double step_s = 900.0;
  std::size_t horizon_steps = 0;
  std::size_t n_scenarios = 0;
  std::vector<double> scenarios;  // n_scenarios x horizon_steps, row-major; column k is step k+1
  std::vector<double> mean_path;  // horizon_steps
  std::vector<double> quantile_levels;
  std::vector<double> quantiles;  // levels x horizon_steps

  double at(std::size_t scenario, std::size_t k) const {
    return scenarios[scenario * horizon_steps + k];
  }
  std::span<const double> quantile_row(std::size_t level_index) const {
    return {quantiles.data() + level_index * horizon_steps, horizon_steps};
  }
};

inline const std::vector<double> kDefaultQuantileLevels = {0.1, 0.5, 0.9};

// Mean path v(k) = mu + (v_now - mu) * rho^k for k = 1..horizon, scenarios add
// AR(1) noise with marginal std sigma * sqrt(1 - rho^(2k)), truncated at 0.
ForecastEnsemble forecast_wind(double v_now, const ClimatologyParams& p,
                               std::size_t horizon_steps, std::size_t n_scenarios,
                               std::uint64_t seed, double issued_at_s = 0.0,
                               double step_s = 900.0,
                               std::vector<double> levels = kDefaultQuantileLevels,
                               kernels::Backend backend = kernels::default_backend());

struct PowerEnsemble {
  double issued_at_s = 0.0;
  double step_s = 900.0;
  std::size_t horizon_steps = 0;
  std::size_t n_scenarios = 0;
  std::vector<double> scenarios_kw;
  std::vector<double> quantile_levels;
  std::vector<double> quantiles_kw;

  std::span<const double> quantile_row(std::size_t level_index) const {
    return {quantiles_kw.data() + level_index * horizon_steps, horizon_steps};
  }
  // Row for the given level; throws ContractViolation if the level is absent.
  std::span<const double> quantile_at(double level) const;
};

// Quantiles are taken on power samples, never wind quantiles pushed through
// the (non-monotone) curve.
PowerEnsemble wind_to_power(const ForecastEnsemble& e, const TurbineParams& t,
                            kernels::Backend backend = kernels::default_backend());

}  // namespace ptx
