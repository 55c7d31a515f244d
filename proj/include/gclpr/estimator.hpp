#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gclpr/basis.hpp"
#include "gclpr/data.hpp"
#include "gclpr/density.hpp"
#include "gclpr/error.hpp"
#include "gclpr/graphs.hpp"
#include "gclpr/kernels.hpp"
#include "gclpr/linalg.hpp"
#include "gclpr/parallel.hpp"

namespace gclpr::estimator {

/// Optional monotone response transform; fits happen on the transformed
/// scale, predictions are mapped back.
enum class ResponseTransform { none, log1p };

inline const char* to_string(ResponseTransform t) {
  return t == ResponseTransform::none ? "none" : "log1p";
}

inline ResponseTransform response_transform_from_string(const std::string& s) {
  if (s == "none") return ResponseTransform::none;
  if (s == "log1p") return ResponseTransform::log1p;
  throw ConfigError("unknown response transform '" + s + "'");
}

inline double transform_response(ResponseTransform t, double y) {
  if (t == ResponseTransform::none) return y;
  if (y <= -1.0) throw DataError("log1p transform requires responses > -1");
  return std::log1p(y);
}

inline double invert_response(ResponseTransform t, double y) {
  return t == ResponseTransform::none ? y : std::expm1(y);
}

/// Either a k-nearest-neighbor bandwidth per query or one fixed width.
/// Adaptive mode restricts each local fit to the k nearest rows (ties at the
/// k-th distance included); fixed mode makes every row a candidate.
struct BandwidthPolicy {
  enum class Mode { adaptive_knn, fixed };

  Mode mode = Mode::adaptive_knn;
  std::size_t neighbors = 30;
  double width = 1.0;

  static BandwidthPolicy adaptive(std::size_t k) {
    BandwidthPolicy b;
    b.mode = Mode::adaptive_knn;
    b.neighbors = k;
    return b;
  }

  static BandwidthPolicy fixed(double h) {
    BandwidthPolicy b;
    b.mode = Mode::fixed;
    b.width = h;
    return b;
  }
};

struct Hyperparameters {
  int degree = 1;
  BandwidthPolicy bandwidth{};
  kernels::CompoundKernelSpec kernel{};
  bool robust = false;
  density::RobustnessSpec robust_spec{};
  double ridge_floor = 1e-8;
  bool standardize = true;
  ResponseTransform transform = ResponseTransform::none;
};

enum class FitFallback { none, degree_reduced, weighted_mean };

/// Outcome of one local fit. `beta` is on the scaled basis ((z - z*)/h
/// monomials) and on the transformed response scale; beta[0] is the
/// prediction before the inverse response transform.
struct QueryFit {
  double prediction = 0.0;
  std::vector<double> beta;
  double weight_sum = 0.0;
  std::size_t used_neighbors = 0;
  int degree_used = 0;
  FitFallback fallback = FitFallback::none;
};

struct PredictResult {
  std::vector<double> predictions;  // raw response scale; NaN on failed rows
  std::vector<QueryFit> fits;
  std::vector<std::string> errors;  // empty string when the row succeeded
  std::size_t failures = 0;
};

class FittedModel {
 public:
  static FittedModel fit(Dataset data, Hyperparameters hp,
                         std::shared_ptr<const graphs::Graph> graph = nullptr) {
    FittedModel m;
    data.validate();
    if (data.rows() == 0) throw EmptyTrainingError("fit: no training rows");
    if (!data.has_response()) throw DataError("fit: training data has no response");
    if (data.dim() == 0) throw DimensionError("fit: no fitting coordinates");
    validate_hp(hp, data.rows());
    hp.kernel.validate();

    m.hp_ = std::move(hp);
    m.data_ = std::move(data);
    m.graph_ = std::move(graph);

    const std::size_t n = m.data_.rows();
    m.fit_y_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      m.fit_y_[i] = transform_response(m.hp_.transform, m.data_.y[i]);

    m.std_ = m.hp_.standardize ? linalg::Standardizer::fit(m.data_.z)
                               : linalg::Standardizer::identity(m.data_.dim());
    m.zs_ = m.std_.apply(m.data_.z);

    if (m.hp_.kernel.metric.kind == kernels::DistanceMetric::Kind::mahalanobis &&
        m.hp_.kernel.metric.precision.empty()) {
      if (n < 2) throw DegenerateError("fit: mahalanobis metric needs at least two rows");
      linalg::Matrix cov = linalg::covariance(m.zs_);
      double diag_mean = 0.0;
      for (std::size_t j = 0; j < cov.rows(); ++j) diag_mean += cov(j, j);
      diag_mean /= static_cast<double>(cov.rows());
      for (std::size_t j = 0; j < cov.rows(); ++j)
        cov(j, j) += 1e-9 * (diag_mean > 0.0 ? diag_mean : 1.0);
      m.hp_.kernel.metric.precision = linalg::invert_spd(cov, m.hp_.ridge_floor);
    }

    m.bind_factor_contexts();

    if (m.hp_.robust) {
      m.robust_w_ = density::conditional_density_weights(m.zs_, m.fit_y_, m.hp_.robust_spec);
    } else {
      m.robust_w_.assign(n, 1.0);
    }

    m.scale_floor_ = m.compute_scale_floor();
    for (int deg = 0; deg <= m.hp_.degree; ++deg)
      m.bases_.emplace_back(deg, static_cast<int>(m.data_.dim()));
    return m;
  }

  const Hyperparameters& hyperparameters() const { return hp_; }
  const Dataset& training_data() const { return data_; }
  const linalg::Standardizer& standardizer() const { return std_; }
  const std::vector<double>& robust_weights() const { return robust_w_; }
  std::shared_ptr<const graphs::Graph> graph() const { return graph_; }
  double scale_floor() const { return scale_floor_; }

  /// The bandwidth a local fit at this query would use.
  double adaptive_bandwidth(std::span<const double> z_raw) const {
    if (hp_.bandwidth.mode == BandwidthPolicy::Mode::fixed) return hp_.bandwidth.width;
    std::vector<double> zq = standardize_query(z_raw);
    std::vector<double> dist = distances(zq);
    std::vector<std::size_t> order = sorted_order(dist);
    return bandwidth_from(dist, order);
  }

  /// One local fit. query_contexts must hold one value per context factor,
  /// in factor order.
  QueryFit fit_at(std::span<const double> z_raw,
                  std::span<const kernels::ContextValue> query_contexts = {}) const {
    const auto& factors = hp_.kernel.factors;
    if (query_contexts.size() != factors.size())
      throw DimensionError("fit_at: one query context per factor required");
    std::vector<double> zq = standardize_query(z_raw);
    std::vector<double> dist = distances(zq);

    std::vector<std::size_t> cand;
    double h = 0.0;
    const std::size_t n = data_.rows();
    if (hp_.bandwidth.mode == BandwidthPolicy::Mode::adaptive_knn) {
      const std::vector<std::size_t> order = sorted_order(dist);
      h = bandwidth_from(dist, order);
      const double kth = dist[order[hp_.bandwidth.neighbors - 1]];
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = order[r];
        if (dist[i] > kth) break;
        cand.push_back(i);
      }
    } else {
      h = hp_.bandwidth.width;
      cand.resize(n);
      std::iota(cand.begin(), cand.end(), 0);
    }

    std::vector<double> w(cand.size(), 0.0);
    double wmax = 0.0;
    for (std::size_t r = 0; r < cand.size(); ++r) {
      const std::size_t i = cand[r];
      double wi = kernels::kernel_weight(hp_.kernel.kernel, dist[i] / h);
      for (std::size_t f = 0; f < factors.size() && wi > 0.0; ++f)
        wi *= kernels::context_factor(factors[f], query_contexts[f], factor_ctx_[f][i],
                                      hops_.get());
      wi *= robust_w_[i];
      w[r] = wi;
      wmax = std::max(wmax, wi);
    }

    std::vector<std::size_t> kept;
    kept.reserve(cand.size());
    for (std::size_t r = 0; r < cand.size(); ++r)
      if (w[r] > 1e-14 * wmax && w[r] > 0.0) kept.push_back(r);

    QueryFit out;
    for (std::size_t r : kept) {
      out.weight_sum += w[r];
      ++out.used_neighbors;
    }

    const std::size_t d = data_.dim();
    std::vector<double> t(d), row;
    for (int deg = hp_.degree; deg >= 0; --deg) {
      const basis::MultiIndexSet& mis = bases_[static_cast<std::size_t>(deg)];
      const std::size_t msize = mis.size();
      if (kept.size() < msize) continue;
      linalg::Matrix g(msize, msize);
      std::vector<double> rhs(msize, 0.0);
      row.resize(msize);
      for (std::size_t r : kept) {
        const std::size_t i = cand[r];
        for (std::size_t j = 0; j < d; ++j) t[j] = (zs_(i, j) - zq[j]) / h;
        mis.eval_row(t, row);
        const double wi = w[r];
        for (std::size_t a = 0; a < msize; ++a) {
          rhs[a] += wi * row[a] * fit_y_[i];
          for (std::size_t b = a; b < msize; ++b) g(a, b) += wi * row[a] * row[b];
        }
      }
      for (std::size_t a = 0; a < msize; ++a)
        for (std::size_t b = a + 1; b < msize; ++b) g(b, a) = g(a, b);
      try {
        out.beta = linalg::solve_spd(g, rhs, hp_.ridge_floor);
      } catch (const SingularError&) {
        continue;
      }
      out.prediction = out.beta[0];
      out.degree_used = deg;
      out.fallback = deg == hp_.degree ? FitFallback::none : FitFallback::degree_reduced;
      return out;
    }

    // No degree could be solved, which means no kept rows carry weight:
    // fall back to the unweighted mean over the candidate neighborhood.
    double mean = 0.0;
    for (std::size_t i : cand) mean += fit_y_[i];
    mean /= static_cast<double>(cand.size());
    out.prediction = mean;
    out.beta.assign(1, mean);
    out.degree_used = 0;
    out.fallback = FitFallback::weighted_mean;
    return out;
  }

  /// Batch prediction on a query table. Failed rows carry NaN predictions
  /// and an error message; successful rows are unaffected.
  PredictResult predict(const Dataset& queries, unsigned threads = 1) const {
    queries.validate();
    if (queries.dim() != data_.dim())
      throw DimensionError("predict: query dimension mismatch");
    const auto& factors = hp_.kernel.factors;
    std::vector<const ContextChannel*> channels(factors.size(), nullptr);
    for (std::size_t f = 0; f < factors.size(); ++f) {
      channels[f] = &queries.require_context(factors[f].channel);
      const bool need_label = factors[f].kind != kernels::ContextFactorSpec::Kind::rbf_over_metric;
      const bool is_label = channels[f]->kind == ContextChannel::Kind::label;
      if (factors[f].kind == kernels::ContextFactorSpec::Kind::indicator) continue;
      if (need_label != is_label)
        throw DataError("predict: context channel '" + factors[f].channel +
                        "' has the wrong kind for its factor");
    }
    const std::size_t nq = queries.rows();
    PredictResult res;
    res.predictions.assign(nq, std::numeric_limits<double>::quiet_NaN());
    res.fits.resize(nq);
    res.errors.assign(nq, std::string());
    parallel_for(nq, threads, [&](std::size_t i) {
      try {
        std::vector<kernels::ContextValue> ctx;
        ctx.reserve(factors.size());
        for (std::size_t f = 0; f < factors.size(); ++f) ctx.push_back(channels[f]->value(i));
        res.fits[i] = fit_at(queries.z.row(i), ctx);
        res.predictions[i] = invert_response(hp_.transform, res.fits[i].prediction);
      } catch (const Error& e) {
        res.errors[i] = e.what();
      }
    });
    for (const auto& e : res.errors)
      if (!e.empty()) ++res.failures;
    return res;
  }

 private:
  static void validate_hp(const Hyperparameters& hp, std::size_t n) {
    if (hp.degree < 0 || hp.degree > 3) throw ConfigError("fit: degree must be in [0,3]");
    if (hp.ridge_floor < 0.0) throw ConfigError("fit: ridge_floor must be >= 0");
    if (hp.bandwidth.mode == BandwidthPolicy::Mode::adaptive_knn) {
      if (hp.bandwidth.neighbors < 1 || hp.bandwidth.neighbors > n)
        throw ConfigError("fit: neighbors must be in [1, n]");
    } else if (!(hp.bandwidth.width > 0.0) || !std::isfinite(hp.bandwidth.width)) {
      throw ConfigError("fit: fixed bandwidth must be positive");
    }
  }

  void bind_factor_contexts() {
    const auto& factors = hp_.kernel.factors;
    factor_ctx_.resize(factors.size());
    bool needs_graph = false;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const ContextChannel& ch = data_.require_context(factors[f].channel);
      const std::size_t n = data_.rows();
      factor_ctx_[f].reserve(n);
      for (std::size_t i = 0; i < n; ++i) factor_ctx_[f].push_back(ch.value(i));
      if (factors[f].kind == kernels::ContextFactorSpec::Kind::graph_hop) {
        needs_graph = true;
        if (!graph_) throw ConfigError("fit: graph_hop factor requires a bound graph");
        if (ch.kind != ContextChannel::Kind::label)
          throw DataError("fit: graph_hop factor needs a label channel");
        for (const std::string& id : ch.labels) graph_->require_index(id);
      }
    }
    if (needs_graph) hops_ = std::make_shared<graphs::HopCache>(*graph_);
  }

  double compute_scale_floor() const {
    const std::size_t d = data_.dim();
    std::vector<double> lo(d), hi(d);
    for (std::size_t j = 0; j < d; ++j) lo[j] = hi[j] = zs_(0, j);
    for (std::size_t i = 1; i < data_.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], zs_(i, j));
        hi[j] = std::max(hi[j], zs_(i, j));
      }
    const double diam = kernels::distance(hp_.kernel.metric, lo, hi);
    return diam > 0.0 ? 1e-12 * diam : 1e-12;
  }

  std::vector<double> standardize_query(std::span<const double> z_raw) const {
    if (z_raw.size() != data_.dim()) throw DimensionError("query dimension mismatch");
    for (double v : z_raw)
      if (!std::isfinite(v)) throw NonFiniteError("query coordinate is not finite");
    std::vector<double> zq(z_raw.size());
    std_.apply_row(z_raw, zq);
    return zq;
  }

  std::vector<double> distances(std::span<const double> zq) const {
    const std::size_t n = data_.rows();
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = kernels::distance(hp_.kernel.metric, zq, zs_.row(i));
    return dist;
  }

  std::vector<std::size_t> sorted_order(const std::vector<double>& dist) const {
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (dist[a] != dist[b]) return dist[a] < dist[b];
      return a < b;
    });
    return order;
  }

  double bandwidth_from(const std::vector<double>& dist,
                        const std::vector<std::size_t>& order) const {
    const double kth = dist[order[hp_.bandwidth.neighbors - 1]];
    const double h = 1.05 * kth;
    return h > scale_floor_ ? h : scale_floor_;
  }

  Dataset data_;
  Hyperparameters hp_;
  std::shared_ptr<const graphs::Graph> graph_;
  std::shared_ptr<graphs::HopCache> hops_;
  linalg::Standardizer std_;
  linalg::Matrix zs_;
  std::vector<double> fit_y_;
  std::vector<double> robust_w_;
  std::vector<std::vector<kernels::ContextValue>> factor_ctx_;
  std::vector<basis::MultiIndexSet> bases_;
  double scale_floor_ = 1e-12;
};

enum class KnnWeighting { uniform, inverse_distance };

inline const char* to_string(KnnWeighting w) {
  return w == KnnWeighting::uniform ? "uniform" : "inverse_distance";
}

inline KnnWeighting knn_weighting_from_string(const std::string& s) {
  if (s == "uniform") return KnnWeighting::uniform;
  if (s == "inverse_distance") return KnnWeighting::inverse_distance;
  throw ConfigError("unknown knn weighting '" + s + "'");
}

/// k-nearest-neighbor baseline on the same standardized coordinates. Ties at
/// the k-th distance are all included.
inline std::vector<double> knn_predict(const Dataset& data, const Dataset& queries,
                                       std::size_t k,
                                       KnnWeighting weighting = KnnWeighting::uniform,
                                       kernels::DistanceMetric metric =
                                           kernels::DistanceMetric::minkowski(2.0),
                                       bool standardize = true, unsigned threads = 1) {
  data.validate();
  queries.validate();
  const std::size_t n = data.rows();
  if (n == 0) throw EmptyTrainingError("knn_predict: no training rows");
  if (!data.has_response()) throw DataError("knn_predict: training data has no response");
  if (k < 1 || k > n) throw ConfigError("knn_predict: k must be in [1, n]");
  if (queries.dim() != data.dim()) throw DimensionError("knn_predict: dimension mismatch");
  if (metric.kind == kernels::DistanceMetric::Kind::mahalanobis && metric.precision.empty()) {
    linalg::Matrix cov = linalg::covariance(
        standardize ? linalg::Standardizer::fit(data.z).apply(data.z) : data.z);
    for (std::size_t j = 0; j < cov.rows(); ++j) cov(j, j) += 1e-9;
    metric.precision = linalg::invert_spd(cov);
  }
  const linalg::Standardizer std_ = standardize ? linalg::Standardizer::fit(data.z)
                                                : linalg::Standardizer::identity(data.dim());
  const linalg::Matrix zs = std_.apply(data.z);
  const linalg::Matrix qs = std_.apply(queries.z);
  std::vector<double> out(queries.rows(), 0.0);
  parallel_for(queries.rows(), threads, [&](std::size_t qi) {
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t i = 0; i < n; ++i)
      order[i] = {kernels::distance(metric, qs.row(qi), zs.row(i)), i};
    std::sort(order.begin(), order.end());
    const double kth = order[k - 1].first;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n && order[i].first <= kth; ++i) {
      const double w =
          weighting == KnnWeighting::uniform ? 1.0 : 1.0 / (order[i].first + 1e-12);
      num += w * data.y[order[i].second];
      den += w;
    }
    out[qi] = num / den;
  });
  return out;
}

}  // namespace gclpr::estimator
