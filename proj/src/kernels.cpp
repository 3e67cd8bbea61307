#include "ptx/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#ifdef PTX_HAVE_OPENMP
#include <omp.h>
#endif

namespace ptx::kernels {

Backend default_backend() { return openmp_available() ? Backend::OpenMP : Backend::Serial; }

bool openmp_available() {
#ifdef PTX_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

namespace {

// Normalises the pivot row and records its non-zero columns.
void prepare_pivot_row(double* row, std::size_t cols, std::size_t q,
                       std::vector<std::size_t>& nz) {
  const double inv = 1.0 / row[q];
  nz.clear();
  for (std::size_t j = 0; j < cols; ++j) {
    if (row[j] != 0.0) {
      row[j] *= inv;
      nz.push_back(j);
    }
  }
  row[q] = 1.0;
}

inline void eliminate(double* __restrict target, const double* __restrict prow, std::size_t q,
                      std::size_t cols, const std::vector<std::size_t>& nz) {
  const double f = target[q];
  if (f == 0.0) return;
  if (nz.size() * 3 > cols) {
    // dense enough that a straight vectorisable sweep beats the gather
    for (std::size_t j = 0; j < cols; ++j) target[j] -= f * prow[j];
  } else {
    for (std::size_t j : nz) target[j] -= f * prow[j];
  }
  target[q] = 0.0;
}

}  // namespace

void pivot_seq(std::span<double> tableau, std::size_t rows, std::size_t cols, std::size_t r,
               std::size_t q, std::span<double> obj, std::vector<std::size_t>& scratch) {
  double* base = tableau.data();
  double* prow = base + r * cols;
  prepare_pivot_row(prow, cols, q, scratch);
  for (std::size_t i = 0; i < rows; ++i) {
    if (i != r) eliminate(base + i * cols, prow, q, cols, scratch);
  }
  eliminate(obj.data(), prow, q, cols, scratch);
}

void pivot_omp(std::span<double> tableau, std::size_t rows, std::size_t cols, std::size_t r,
               std::size_t q, std::span<double> obj, std::vector<std::size_t>& scratch) {
  double* base = tableau.data();
  double* prow = base + r * cols;
  prepare_pivot_row(prow, cols, q, scratch);
  const std::vector<std::size_t>& nz = scratch;
  const long long n = static_cast<long long>(rows);
#pragma omp parallel for schedule(static) if (rows * nz.size() > 32768)
  for (long long i = 0; i < n; ++i) {
    if (static_cast<std::size_t>(i) != r) eliminate(base + i * cols, prow, q, cols, nz);
  }
  eliminate(obj.data(), prow, q, cols, nz);
}

void pivot(Backend b, std::span<double> tableau, std::size_t rows, std::size_t cols,
           std::size_t r, std::size_t q, std::span<double> obj,
           std::vector<std::size_t>& scratch) {
  if (b == Backend::OpenMP) {
    pivot_omp(tableau, rows, cols, r, q, obj, scratch);
  } else {
    pivot_seq(tableau, rows, cols, r, q, obj, scratch);
  }
}

void power_matrix_seq(std::span<const double> wind, std::span<double> power,
                      const TurbineParams& t) {
  for (std::size_t i = 0; i < wind.size(); ++i) power[i] = power_curve(wind[i], t);
}

void power_matrix_omp(std::span<const double> wind, std::span<double> power,
                      const TurbineParams& t) {
  const long long n = static_cast<long long>(wind.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (long long i = 0; i < n; ++i) power[i] = power_curve(wind[i], t);
}

void power_matrix(Backend b, std::span<const double> wind, std::span<double> power,
                  const TurbineParams& t) {
  if (b == Backend::OpenMP) {
    power_matrix_omp(wind, power, t);
  } else {
    power_matrix_seq(wind, power, t);
  }
}

double sorted_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(level, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  if (lo == hi) return sorted[lo];
  return 0.5 * (sorted[lo] + sorted[hi]);
}

namespace {

void one_column(std::span<const double> values, std::size_t rows, std::size_t cols,
                std::size_t c, std::span<const double> levels, std::span<double> out,
                std::vector<double>& buf) {
  buf.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) buf[i] = values[i * cols + c];
  std::sort(buf.begin(), buf.end());
  for (std::size_t l = 0; l < levels.size(); ++l) out[l * cols + c] = sorted_quantile(buf, levels[l]);
}

}  // namespace

void column_quantiles_seq(std::span<const double> values, std::size_t rows, std::size_t cols,
                          std::span<const double> levels, std::span<double> out) {
  std::vector<double> buf;
  for (std::size_t c = 0; c < cols; ++c) one_column(values, rows, cols, c, levels, out, buf);
}

void column_quantiles_omp(std::span<const double> values, std::size_t rows, std::size_t cols,
                          std::span<const double> levels, std::span<double> out) {
  const long long n = static_cast<long long>(cols);
#pragma omp parallel if (rows * cols > 4096)
  {
    std::vector<double> buf;
#pragma omp for schedule(static)
    for (long long c = 0; c < n; ++c) {
      one_column(values, rows, cols, static_cast<std::size_t>(c), levels, out, buf);
    }
  }
}

void column_quantiles(Backend b, std::span<const double> values, std::size_t rows,
                      std::size_t cols, std::span<const double> levels, std::span<double> out) {
  if (b == Backend::OpenMP) {
    column_quantiles_omp(values, rows, cols, levels, out);
  } else {
    column_quantiles_seq(values, rows, cols, levels, out);
  }
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

void one_scenario(std::span<const double> mean, double sigma, double rho, std::size_t i,
                  std::uint64_t seed, std::span<double> out) {
  const std::size_t steps = mean.size();
  double* row = out.data() + i * steps;
  if (sigma == 0.0) {
    for (std::size_t k = 0; k < steps; ++k) row[k] = std::max(0.0, mean[k]);
    return;
  }
  std::mt19937_64 rng(stream_seed(seed, i));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innovation = sigma * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double dev = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    dev = rho * dev + innovation * normal(rng);
    row[k] = std::max(0.0, mean[k] + dev);
  }
}

}  // namespace

void ar1_scenarios_seq(std::span<const double> mean, double sigma, double rho,
                       std::size_t scenarios, std::uint64_t seed, std::span<double> out) {
  for (std::size_t i = 0; i < scenarios; ++i) one_scenario(mean, sigma, rho, i, seed, out);
}

void ar1_scenarios_omp(std::span<const double> mean, double sigma, double rho,
                       std::size_t scenarios, std::uint64_t seed, std::span<double> out) {
  const long long n = static_cast<long long>(scenarios);
#pragma omp parallel for schedule(static) if (scenarios * mean.size() > 4096)
  for (long long i = 0; i < n; ++i) {
    one_scenario(mean, sigma, rho, static_cast<std::size_t>(i), seed, out);
  }
}

void ar1_scenarios(Backend b, std::span<const double> mean, double sigma, double rho,
                   std::size_t scenarios, std::uint64_t seed, std::span<double> out) {
  if (b == Backend::OpenMP) {
    ar1_scenarios_omp(mean, sigma, rho, scenarios, seed, out);
  } else {
    ar1_scenarios_seq(mean, sigma, rho, scenarios, seed, out);
  }
}

}  // namespace ptx::kernels
