#pragma once

// Data-parallel inner loops. Every kernel has a serial reference (_seq) and an
// OpenMP variant (_omp) that produces bit-identical output: the parallel loops
// partition independent rows/columns/scenarios and never reduce across threads.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ptx/plant.hpp"

namespace ptx::kernels {

enum class Backend : std::uint8_t { Serial, OpenMP };

// OpenMP when the library was built with it, Serial otherwise.
Backend default_backend();
bool openmp_available();

// Gauss-Jordan pivot of a dense row-major tableau (rows x cols) on element
// (r, q), also eliminating column q from the reduced-cost row `obj`.
// `scratch` receives the non-zero column indices of the pivot row.
void pivot_seq(std::span<double> tableau, std::size_t rows, std::size_t cols, std::size_t r,
               std::size_t q, std::span<double> obj, std::vector<std::size_t>& scratch);
void pivot_omp(std::span<double> tableau, std::size_t rows, std::size_t cols, std::size_t r,
               std::size_t q, std::span<double> obj, std::vector<std::size_t>& scratch);
void pivot(Backend b, std::span<double> tableau, std::size_t rows, std::size_t cols,
           std::size_t r, std::size_t q, std::span<double> obj, std::vector<std::size_t>& scratch);

// Elementwise power curve over a scenario matrix.
void power_matrix_seq(std::span<const double> wind, std::span<double> power,
                      const TurbineParams& t);
void power_matrix_omp(std::span<const double> wind, std::span<double> power,
                      const TurbineParams& t);
void power_matrix(Backend b, std::span<const double> wind, std::span<double> power,
                  const TurbineParams& t);

// Per-column empirical quantiles (midpoint rule) of a rows x cols matrix.
// out is levels.size() x cols, row-major.
void column_quantiles_seq(std::span<const double> values, std::size_t rows, std::size_t cols,
                          std::span<const double> levels, std::span<double> out);
void column_quantiles_omp(std::span<const double> values, std::size_t rows, std::size_t cols,
                          std::span<const double> levels, std::span<double> out);
void column_quantiles(Backend b, std::span<const double> values, std::size_t rows,
                      std::size_t cols, std::span<const double> levels, std::span<double> out);

// AR(1) deviations around a mean path, one independent RNG stream per
// scenario: dev_k = rho * dev_{k-1} + sigma * sqrt(1 - rho^2) * eps_k, dev_0 = 0.
// out[i * steps + k] = max(0, mean[k] + dev_{k+1}).
void ar1_scenarios_seq(std::span<const double> mean, double sigma, double rho,
                       std::size_t scenarios, std::uint64_t seed, std::span<double> out);
void ar1_scenarios_omp(std::span<const double> mean, double sigma, double rho,
                       std::size_t scenarios, std::uint64_t seed, std::span<double> out);
void ar1_scenarios(Backend b, std::span<const double> mean, double sigma, double rho,
                   std::size_t scenarios, std::uint64_t seed, std::span<double> out);

// Midpoint-rule quantile of an ascending-sorted sample.
double sorted_quantile(std::span<const double> sorted, double level);

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ptx::kernels
