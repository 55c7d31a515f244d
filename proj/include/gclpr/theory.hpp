#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "gclpr/basis.hpp"
#include "gclpr/error.hpp"
#include "gclpr/estimator.hpp"
#include "gclpr/kernels.hpp"
#include "gclpr/linalg.hpp"
#include "gclpr/parallel.hpp"
#include "gclpr/rng.hpp"

namespace gclpr::theory {

/// A finite joint distribution over (z, context, y) used as an exact oracle
/// for context-smoothed population quantities.
struct Atom {
  double z = 0.0;
  kernels::ContextValue context;
  double y = 0.0;
  double prob = 0.0;
};

struct DiscreteJointDistribution {
  std::vector<Atom> atoms;

  void validate() const {
    if (atoms.empty()) throw DegenerateError("distribution: no atoms");
    double total = 0.0;
    for (const Atom& a : atoms) {
      if (!std::isfinite(a.z) || !std::isfinite(a.y) || !std::isfinite(a.prob))
        throw NonFiniteError("distribution: non-finite atom");
      if (a.prob <= 0.0) throw Error("distribution: atom probabilities must be positive");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error("distribution: probabilities must sum to 1");
  }
};

/// Context-smoothed regression target at (z, c*): the W-weighted mean of Y
/// among atoms at this z, with W the context factor against c*.
inline double m_w_oracle(const DiscreteJointDistribution& dist,
                         const kernels::ContextFactorSpec& factor,
                         const kernels::ContextValue& c_star, double z,
                         const graphs::HopCache* hops = nullptr) {
  dist.validate();
  double num = 0.0, den = 0.0;
  bool any = false;
  for (const Atom& a : dist.atoms) {
    if (a.z != z) continue;
    any = true;
    const double w = kernels::context_factor(factor, c_star, a.context, hops);
    num += a.prob * w * a.y;
    den += a.prob * w;
  }
  if (!any) throw ZeroMassError("m_w_oracle: no atoms at the requested z");
  if (den <= 0.0) throw ZeroMassError("m_w_oracle: zero context mass at z");
  return num / den;
}

/// Residual of the weighted variance decomposition at (z, c*):
/// E[(Y-a)^2 W | Z=z] - E[(Y-m_W)^2 W | Z=z] - E[W | Z=z] (a - m_W)^2.
/// Exactly zero for every trial value a, up to rounding.
inline double decomposition_residual(const DiscreteJointDistribution& dist,
                                     const kernels::ContextFactorSpec& factor,
                                     const kernels::ContextValue& c_star, double z, double a,
                                     const graphs::HopCache* hops = nullptr) {
  const double m_w = m_w_oracle(dist, factor, c_star, z, hops);
  double z_mass = 0.0, w_mass = 0.0, lhs = 0.0, centered = 0.0;
  for (const Atom& atom : dist.atoms) {
    if (atom.z != z) continue;
    z_mass += atom.prob;
    const double w = kernels::context_factor(factor, c_star, atom.context, hops);
    w_mass += atom.prob * w;
    lhs += atom.prob * w * (atom.y - a) * (atom.y - a);
    centered += atom.prob * w * (atom.y - m_w) * (atom.y - m_w);
  }
  const double rhs = centered + w_mass * (a - m_w) * (a - m_w);
  // Conditioning on Z=z divides every term by the same z_mass.
  return (lhs - rhs) / z_mass;
}

struct QuadratureSpec {
  double half_width = 1.0;
  std::size_t nodes = 201;  // per axis; doubled for the self-check
  double check_tol = 1e-6;
};

struct KernelMoments {
  linalg::Matrix m0;      // integral of r(t) r(t)^T K(|t|)
  linalg::Matrix omega0;  // integral of r(t) r(t)^T K(|t|)^2
};

namespace detail {

inline KernelMoments moments_once(kernels::SmoothingKernel kernel, int degree, int dim,
                                  double half_width, std::size_t nodes) {
  const basis::MultiIndexSet mis(degree, dim);
  const std::size_t m = mis.size();
  KernelMoments out{linalg::Matrix(m, m), linalg::Matrix(m, m)};
  const double step = 2.0 * half_width / static_cast<double>(nodes - 1);
  std::vector<std::size_t> odo(static_cast<std::size_t>(dim), 0);
  std::vector<double> t(static_cast<std::size_t>(dim));
  std::vector<double> row(m);
  while (true) {
    double wt = 1.0;
    double norm2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      const std::size_t i = odo[static_cast<std::size_t>(j)];
      t[static_cast<std::size_t>(j)] = -half_width + step * static_cast<double>(i);
      wt *= (i == 0 || i == nodes - 1) ? 0.5 * step : step;
      norm2 += t[static_cast<std::size_t>(j)] * t[static_cast<std::size_t>(j)];
    }
    const double k = kernels::kernel_weight(kernel, std::sqrt(norm2));
    if (k != 0.0) {
      mis.eval_row(t, row);
      const double wk = wt * k;
      const double wk2 = wt * k * k;
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a; b < m; ++b) {
          out.m0(a, b) += wk * row[a] * row[b];
          out.omega0(a, b) += wk2 * row[a] * row[b];
        }
    }
    int j = 0;
    for (; j < dim; ++j) {
      if (++odo[static_cast<std::size_t>(j)] < nodes) break;
      odo[static_cast<std::size_t>(j)] = 0;
    }
    if (j == dim) break;
  }
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      out.m0(b, a) = out.m0(a, b);
      out.omega0(b, a) = out.omega0(a, b);
    }
  return out;
}

}  // namespace detail

/// Moment matrices of the polynomial basis under a radial kernel, by tensor
/// trapezoid quadrature. The grid is recomputed at doubled resolution; a
/// disagreement beyond check_tol throws QuadratureError.
inline KernelMoments kernel_moments(kernels::SmoothingKernel kernel, int degree, int dim,
                                    const QuadratureSpec& spec = {}) {
  if (spec.nodes < 3) throw ConfigError("kernel_moments: need at least 3 nodes");
  if (!(spec.half_width > 0.0)) throw ConfigError("kernel_moments: half_width must be positive");
  const KernelMoments coarse =
      detail::moments_once(kernel, degree, dim, spec.half_width, spec.nodes);
  const KernelMoments fine =
      detail::moments_once(kernel, degree, dim, spec.half_width, 2 * spec.nodes - 1);
  double diff = 0.0;
  for (std::size_t a = 0; a < coarse.m0.rows(); ++a)
    for (std::size_t b = 0; b < coarse.m0.cols(); ++b) {
      diff = std::max(diff, std::abs(coarse.m0(a, b) - fine.m0(a, b)));
      diff = std::max(diff, std::abs(coarse.omega0(a, b) - fine.omega0(a, b)));
    }
  if (diff > spec.check_tol)
    throw QuadratureError("kernel_moments: quadrature self-check failed");
  return fine;
}

enum class TargetKind { sine, affine };

inline double target_value(TargetKind kind, double z) {
  return kind == TargetKind::sine ? std::sin(2.0 * std::numbers::pi * z) : 1.0 + 2.0 * z;
}

/// Design for the finite-sample bias measurement: Z is drawn from a
/// two-piece uniform density on [0,1] with P(Z < split) = left_mass, so a
/// left_mass equal to split gives the uniform design and any other value
/// puts a density jump at the split point.
struct BiasScenario {
  TargetKind target = TargetKind::sine;
  double query = 0.25;
  double split = 0.5;
  double left_mass = 0.5;
  double noise_sigma = 0.0;
};

struct RateResult {
  std::vector<double> xs;       // log h or log n
  std::vector<double> ys;       // log bias or log variance
  std::vector<double> values;   // per-point |bias| or variance
  double slope = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double ls_slope(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxy / sxx;
}

inline double draw_design_point(Rng& rng, const BiasScenario& sc) {
  if (rng.uniform() < sc.left_mass) return sc.split * rng.uniform();
  return sc.split + (1.0 - sc.split) * rng.uniform();
}

inline estimator::FittedModel fit_fixed_1d(const std::vector<double>& z,
                                           const std::vector<double>& y, int degree, double h) {
  Dataset d;
  d.z = linalg::Matrix(z.size(), 1);
  for (std::size_t i = 0; i < z.size(); ++i) d.z(i, 0) = z[i];
  d.y = y;
  estimator::Hyperparameters hp;
  hp.degree = degree;
  hp.kernel.kernel = kernels::SmoothingKernel::tricube;
  hp.bandwidth = estimator::BandwidthPolicy::fixed(h);
  hp.standardize = false;
  return estimator::FittedModel::fit(std::move(d), hp);
}

}  // namespace detail

/// Average prediction error at the query across replications of a local fit
/// with fixed bandwidths, one point per bandwidth in the grid, plus the
/// log-log slope of |bias| against h. Replication r of every bandwidth sees
/// the same draw, so the grid is internally paired.
inline RateResult bias_rate_experiment(const BiasScenario& sc, int degree,
                                       std::span<const double> h_grid, std::size_t n,
                                       std::size_t replications, std::uint64_t seed,
                                       unsigned threads = 1) {
  if (h_grid.size() < 1) throw ConfigError("bias_rate: empty bandwidth grid");
  if (replications < 1) throw ConfigError("bias_rate: need replications");
  const double truth = target_value(sc.target, sc.query);
  std::vector<double> sums(h_grid.size(), 0.0);
  std::vector<std::vector<double>> preds(h_grid.size(),
                                         std::vector<double>(replications, 0.0));
  parallel_for(replications, threads, [&](std::size_t rep) {
    Rng rng(mix_seed(seed, rep));
    std::vector<double> z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = detail::draw_design_point(rng, sc);
      y[i] = target_value(sc.target, z[i]);
    }
    if (sc.noise_sigma > 0.0)
      for (std::size_t i = 0; i < n; ++i) y[i] += sc.noise_sigma * rng.normal();
    for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
      const auto model = detail::fit_fixed_1d(z, y, degree, h_grid[hi]);
      preds[hi][rep] = model.fit_at(std::vector<double>{sc.query}).prediction;
    }
  });
  RateResult out;
  for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
    double mean = 0.0;
    for (double p : preds[hi]) mean += p;
    mean /= static_cast<double>(replications);
    const double bias = std::abs(mean - truth);
    out.values.push_back(bias);
    out.xs.push_back(std::log(h_grid[hi]));
    out.ys.push_back(bias > 0.0 ? std::log(bias) : -std::numeric_limits<double>::infinity());
  }
  bool loggable = h_grid.size() >= 2;
  for (double v : out.values)
    if (!(v > 0.0)) loggable = false;
  if (loggable) out.slope = detail::ls_slope(out.xs, out.ys);
  return out;
}

/// Monte Carlo variance design: a design fixed across replications, fresh
/// noise per replication; optionally two latent groups with different means
/// redrawn per replication to model context mixing at a point.
struct VarianceScenario {
  double query = 0.3;
  double noise_sigma = 0.5;
  bool context_mixing = false;
  double mix_gap = 1.0;
};

/// Variance of the local fit at the query for each sample size, and the
/// log-log slope of variance against n.
inline RateResult variance_scaling_experiment(const VarianceScenario& sc, int degree, double h,
                                              std::span<const std::size_t> n_grid,
                                              std::size_t replications, std::uint64_t seed,
                                              unsigned threads = 1) {
  if (n_grid.empty()) throw ConfigError("variance_scaling: empty n grid");
  if (replications < 2) throw ConfigError("variance_scaling: need at least two replications");
  RateResult out;
  for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
    const std::size_t n = n_grid[ni];
    Rng design_rng(mix_seed(seed, 10000 + ni));
    std::vector<double> z(n);
    for (double& v : z) v = design_rng.uniform();
    std::vector<double> preds(replications, 0.0);
    parallel_for(replications, threads, [&](std::size_t rep) {
      Rng rng(mix_seed(seed, 555 * (ni + 1) + rep));
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        double m = std::sin(2.0 * std::numbers::pi * z[i]);
        if (sc.context_mixing) m = rng.uniform() < 0.5 ? 0.0 : sc.mix_gap;
        y[i] = m + sc.noise_sigma * rng.normal();
      }
      const auto model = detail::fit_fixed_1d(z, y, degree, h);
      preds[rep] = model.fit_at(std::vector<double>{sc.query}).prediction;
    });
    double mean = 0.0;
    for (double p : preds) mean += p;
    mean /= static_cast<double>(replications);
    double var = 0.0;
    for (double p : preds) var += (p - mean) * (p - mean);
    var /= static_cast<double>(replications - 1);
    out.values.push_back(var);
    out.xs.push_back(std::log(static_cast<double>(n)));
    out.ys.push_back(var > 0.0 ? std::log(var) : -std::numeric_limits<double>::infinity());
  }
  bool loggable = n_grid.size() >= 2;
  for (double v : out.values)
    if (!(v > 0.0)) loggable = false;
  if (loggable) out.slope = detail::ls_slope(out.xs, out.ys);
  return out;
}

}  // namespace gclpr::theory
