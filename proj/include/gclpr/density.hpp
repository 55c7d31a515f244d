#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "gclpr/error.hpp"
#include "gclpr/linalg.hpp"

namespace gclpr::density {

/// Controls the conditional-density robustness weights: which fitting
/// columns form the chart the neighborhoods live in (empty means all),
/// the neighborhood size, and a multiplier on the per-row response
/// bandwidth.
struct RobustnessSpec {
  std::vector<std::size_t> chart_columns;
  std::size_t k_r = 20;
  double bandwidth_multiplier = 1.0;

  void validate(std::size_t dim) const {
    if (k_r < 2) throw ConfigError("robustness: k_r must be at least 2");
    if (!(bandwidth_multiplier > 0.0))
      throw ConfigError("robustness: bandwidth_multiplier must be positive");
    for (std::size_t c : chart_columns)
      if (c >= dim) throw ConfigError("robustness: chart column out of range");
  }
};

namespace detail {

inline double window_std(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace detail

/// Per-row robustness weights in (0, 1]. Each row gets a kernel density
/// estimate of its own response within the window of its k_r nearest
/// neighbors in the chart (euclidean, self included); estimates are then
/// scaled by the maximum, so typical rows sit near 1 and response outliers
/// near 0. Rows whose window has no response spread get weight 1.
inline std::vector<double> conditional_density_weights(const linalg::Matrix& coords,
                                                       std::span<const double> y,
                                                       const RobustnessSpec& spec) {
  const std::size_t n = coords.rows();
  if (y.size() != n) throw DimensionError("density weights: response length mismatch");
  spec.validate(coords.cols());
  if (n == 0) throw DegenerateError("density weights: empty data");
  if (spec.k_r > n) throw DegenerateError("density weights: k_r larger than row count");
  if (!coords.all_finite()) throw NonFiniteError("density weights: non-finite coordinate");
  for (double v : y)
    if (!std::isfinite(v)) throw NonFiniteError("density weights: non-finite response");

  std::vector<std::size_t> chart = spec.chart_columns;
  if (chart.empty()) {
    chart.resize(coords.cols());
    std::iota(chart.begin(), chart.end(), 0);
  }

  double y_min = y[0], y_max = y[0];
  for (double v : y) {
    y_min = std::min(y_min, v);
    y_max = std::max(y_max, v);
  }
  const double floor_h = 1e-9 * (y_max - y_min);

  std::vector<double> density(n, 0.0);
  std::vector<std::pair<double, std::size_t>> order(n);
  std::vector<double> window_y;
  window_y.reserve(spec.k_r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t c : chart) {
        const double dv = coords(i, c) - coords(j, c);
        d2 += dv * dv;
      }
      order[j] = {d2, j};
    }
    std::sort(order.begin(), order.end());
    window_y.clear();
    for (std::size_t k = 0; k < spec.k_r; ++k) window_y.push_back(y[order[k].second]);
    const double sd = detail::window_std(window_y);
    const double h = std::max(spec.bandwidth_multiplier * 1.06 * sd *
                                  std::pow(static_cast<double>(spec.k_r), -0.2),
                              floor_h);
    if (h <= 0.0) {
      // No spread anywhere in the window or globally: nothing to down-weight.
      density[i] = -1.0;
      continue;
    }
    double sum = 0.0;
    for (double yj : window_y) {
      const double u = (y[i] - yj) / h;
      sum += std::exp(-0.5 * u * u);
    }
    density[i] = sum;
  }

  double dmax = 0.0;
  for (double d : density) dmax = std::max(dmax, d);
  std::vector<double> weights(n, 1.0);
  if (dmax > 0.0) {
    for (std::size_t i = 0; i < n; ++i) weights[i] = density[i] < 0.0 ? 1.0 : density[i] / dmax;
  }
  return weights;
}

}  // namespace gclpr::density
