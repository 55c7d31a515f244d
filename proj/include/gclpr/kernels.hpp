#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gclpr/error.hpp"
#include "gclpr/graphs.hpp"
#include "gclpr/linalg.hpp"

namespace gclpr::kernels {

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Unnormalized smoothing kernels on a scaled distance u >= 0; all satisfy
/// k(0) = 1 and are non-increasing.
enum class SmoothingKernel { gaussian, laplacian, tricube };

inline double kernel_weight(SmoothingKernel k, double u) {
  if (!(u >= 0.0)) throw NonFiniteError("kernel_weight: scaled distance must be >= 0");
  switch (k) {
    case SmoothingKernel::gaussian:
      return std::exp(-0.5 * u * u);
    case SmoothingKernel::laplacian:
      return std::exp(-u);
    case SmoothingKernel::tricube: {
      if (u >= 1.0) return 0.0;
      const double t = 1.0 - u * u * u;
      return t * t * t;
    }
  }
  throw Error("kernel_weight: unknown kernel");
}

inline const char* to_string(SmoothingKernel k) {
  switch (k) {
    case SmoothingKernel::gaussian: return "gaussian";
    case SmoothingKernel::laplacian: return "laplacian";
    case SmoothingKernel::tricube: return "tricube";
  }
  return "?";
}

inline SmoothingKernel smoothing_kernel_from_string(const std::string& name) {
  if (name == "gaussian") return SmoothingKernel::gaussian;
  if (name == "laplacian") return SmoothingKernel::laplacian;
  if (name == "tricube") return SmoothingKernel::tricube;
  throw ConfigError("unknown smoothing kernel '" + name + "'");
}

/// Distance on fitting coordinates: minkowski(order), mahalanobis with an
/// explicit precision matrix, or haversine on (lat, lon) degrees.
struct DistanceMetric {
  enum class Kind { minkowski, mahalanobis, haversine };

  Kind kind = Kind::minkowski;
  double order = 2.0;
  linalg::Matrix precision;
  double radius = kEarthRadiusKm;

  static DistanceMetric minkowski(double order = 2.0) {
    if (!(order >= 1.0)) throw ConfigError("minkowski order must be >= 1");
    DistanceMetric m;
    m.kind = Kind::minkowski;
    m.order = order;
    return m;
  }

  static DistanceMetric mahalanobis(linalg::Matrix precision = {}) {
    DistanceMetric m;
    m.kind = Kind::mahalanobis;
    m.precision = std::move(precision);
    return m;
  }

  static DistanceMetric haversine(double radius = kEarthRadiusKm) {
    if (!(radius > 0.0)) throw ConfigError("haversine radius must be positive");
    DistanceMetric m;
    m.kind = Kind::haversine;
    m.radius = radius;
    return m;
  }
};

inline const char* to_string(DistanceMetric::Kind k) {
  switch (k) {
    case DistanceMetric::Kind::minkowski: return "minkowski";
    case DistanceMetric::Kind::mahalanobis: return "mahalanobis";
    case DistanceMetric::Kind::haversine: return "haversine";
  }
  return "?";
}

inline DistanceMetric::Kind metric_kind_from_string(const std::string& name) {
  if (name == "minkowski") return DistanceMetric::Kind::minkowski;
  if (name == "mahalanobis") return DistanceMetric::Kind::mahalanobis;
  if (name == "haversine") return DistanceMetric::Kind::haversine;
  throw ConfigError("unknown distance metric '" + name + "'");
}

namespace detail {

inline double deg2rad(double deg) { return deg * (3.14159265358979323846 / 180.0); }

}  // namespace detail

/// Haversine great-circle distance between (lat, lon) pairs in degrees,
/// returned in the units of the radius.
inline double haversine_distance(std::span<const double> a, std::span<const double> b,
                                 double radius = kEarthRadiusKm) {
  if (a.size() != 2 || b.size() != 2)
    throw DimensionError("haversine: points must be (lat, lon)");
  const double lat1 = detail::deg2rad(a[0]);
  const double lat2 = detail::deg2rad(b[0]);
  const double dlat = lat2 - lat1;
  const double dlon = detail::deg2rad(b[1] - a[1]);
  const double s1 = std::sin(0.5 * dlat);
  const double s2 = std::sin(0.5 * dlon);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  const double clamped = h < 0.0 ? 0.0 : (h > 1.0 ? 1.0 : h);
  return 2.0 * radius * std::asin(std::sqrt(clamped));
}

inline double distance(const DistanceMetric& metric, std::span<const double> a,
                       std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("distance: point dimensions disagree");
  switch (metric.kind) {
    case DistanceMetric::Kind::minkowski: {
      if (metric.order == std::numeric_limits<double>::infinity()) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
        return m;
      }
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[i]), metric.order);
      return std::pow(s, 1.0 / metric.order);
    }
    case DistanceMetric::Kind::mahalanobis: {
      const linalg::Matrix& p = metric.precision;
      if (p.rows() != a.size() || p.cols() != a.size())
        throw DimensionError("distance: precision matrix shape mismatch");
      std::vector<double> d(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
      double q = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) row += p(i, j) * d[j];
        q += d[i] * row;
      }
      if (q < 0.0) q = 0.0;
      return std::sqrt(q);
    }
    case DistanceMetric::Kind::haversine:
      return haversine_distance(a, b, metric.radius);
  }
  throw Error("distance: unknown metric");
}

/// One observed context value: a numeric vector or a categorical label.
using ContextValue = std::variant<std::vector<double>, std::string>;

inline bool is_label(const ContextValue& v) { return std::holds_alternative<std::string>(v); }

/// One multiplicative context factor bound to a named context channel.
/// All factors map into [0, 1] and equal 1 when query and row contexts agree;
/// `temper` in (0, 1] raises the factor to a power to soften it.
struct ContextFactorSpec {
  enum class Kind { rbf_over_metric, aitchison_aitken, graph_hop, indicator };

  Kind kind = Kind::indicator;
  std::string channel;
  DistanceMetric metric;       // rbf_over_metric
  double length_scale = 1.0;   // rbf_over_metric
  double lambda = 0.0;         // aitchison_aitken mismatch weight in [0, 1)
  double hop_scale = 1.0;      // graph_hop
  double temper = 1.0;

  static ContextFactorSpec rbf(std::string channel, DistanceMetric metric,
                               double length_scale, double temper = 1.0) {
    ContextFactorSpec f;
    f.kind = Kind::rbf_over_metric;
    f.channel = std::move(channel);
    f.metric = std::move(metric);
    f.length_scale = length_scale;
    f.temper = temper;
    return f;
  }

  static ContextFactorSpec aitchison_aitken(std::string channel, double lambda,
                                            double temper = 1.0) {
    ContextFactorSpec f;
    f.kind = Kind::aitchison_aitken;
    f.channel = std::move(channel);
    f.lambda = lambda;
    f.temper = temper;
    return f;
  }

  static ContextFactorSpec graph_hop(std::string channel, double hop_scale,
                                     double temper = 1.0) {
    ContextFactorSpec f;
    f.kind = Kind::graph_hop;
    f.channel = std::move(channel);
    f.hop_scale = hop_scale;
    f.temper = temper;
    return f;
  }

  static ContextFactorSpec indicator(std::string channel) {
    ContextFactorSpec f;
    f.kind = Kind::indicator;
    f.channel = std::move(channel);
    return f;
  }

  void validate() const {
    if (channel.empty()) throw ConfigError("context factor: channel name required");
    if (!(temper > 0.0 && temper <= 1.0)) throw ConfigError("context factor: temper must be in (0,1]");
    switch (kind) {
      case Kind::rbf_over_metric:
        if (!(length_scale > 0.0)) throw ConfigError("rbf factor: length_scale must be positive");
        break;
      case Kind::aitchison_aitken:
        if (!(lambda >= 0.0 && lambda < 1.0))
          throw ConfigError("aitchison_aitken factor: lambda must be in [0,1)");
        break;
      case Kind::graph_hop:
        if (!(hop_scale > 0.0)) throw ConfigError("graph_hop factor: hop_scale must be positive");
        break;
      case Kind::indicator:
        break;
    }
  }
};

inline const char* to_string(ContextFactorSpec::Kind k) {
  switch (k) {
    case ContextFactorSpec::Kind::rbf_over_metric: return "rbf_over_metric";
    case ContextFactorSpec::Kind::aitchison_aitken: return "aitchison_aitken";
    case ContextFactorSpec::Kind::graph_hop: return "graph_hop";
    case ContextFactorSpec::Kind::indicator: return "indicator";
  }
  return "?";
}

inline ContextFactorSpec::Kind factor_kind_from_string(const std::string& name) {
  if (name == "rbf_over_metric") return ContextFactorSpec::Kind::rbf_over_metric;
  if (name == "aitchison_aitken") return ContextFactorSpec::Kind::aitchison_aitken;
  if (name == "graph_hop") return ContextFactorSpec::Kind::graph_hop;
  if (name == "indicator") return ContextFactorSpec::Kind::indicator;
  throw ConfigError("unknown context factor kind '" + name + "'");
}

namespace detail {

inline const std::vector<double>& numeric_context(const ContextValue& v, const char* who) {
  if (const auto* vec = std::get_if<std::vector<double>>(&v)) return *vec;
  throw DataError(std::string(who) + ": numeric context required");
}

inline const std::string& label_context(const ContextValue& v, const char* who) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw DataError(std::string(who) + ": label context required");
}

}  // namespace detail

/// Evaluates one context factor between a query context and a row context.
/// graph_hop factors need the hop cache of the bound graph.
inline double context_factor(const ContextFactorSpec& f, const ContextValue& query,
                             const ContextValue& row, const graphs::HopCache* hops = nullptr) {
  double value = 1.0;
  switch (f.kind) {
    case ContextFactorSpec::Kind::rbf_over_metric: {
      const auto& a = detail::numeric_context(query, "rbf_over_metric");
      const auto& b = detail::numeric_context(row, "rbf_over_metric");
      const double d = distance(f.metric, a, b) / f.length_scale;
      value = std::exp(-0.5 * d * d);
      break;
    }
    case ContextFactorSpec::Kind::aitchison_aitken: {
      const auto& a = detail::label_context(query, "aitchison_aitken");
      const auto& b = detail::label_context(row, "aitchison_aitken");
      value = (a == b) ? 1.0 : f.lambda;
      break;
    }
    case ContextFactorSpec::Kind::graph_hop: {
      if (hops == nullptr) throw ConfigError("graph_hop factor: no graph bound");
      const auto& a = detail::label_context(query, "graph_hop");
      const auto& b = detail::label_context(row, "graph_hop");
      const int h = hops->hops(hops->graph().require_index(a), hops->graph().require_index(b));
      value = (h == graphs::kUnreachable) ? 0.0 : std::exp(-static_cast<double>(h) / f.hop_scale);
      break;
    }
    case ContextFactorSpec::Kind::indicator: {
      if (is_label(query) != is_label(row)) throw DataError("indicator: mixed context types");
      if (is_label(query)) {
        value = (detail::label_context(query, "indicator") == detail::label_context(row, "indicator"))
                    ? 1.0
                    : 0.0;
      } else {
        const auto& a = detail::numeric_context(query, "indicator");
        const auto& b = detail::numeric_context(row, "indicator");
        value = (a == b) ? 1.0 : 0.0;
      }
      break;
    }
  }
  if (f.temper != 1.0 && value > 0.0) value = std::pow(value, f.temper);
  return value;
}

/// Full compound kernel: smoothing kernel over a fitting-space metric times
/// any number of context factors.
struct CompoundKernelSpec {
  SmoothingKernel kernel = SmoothingKernel::tricube;
  DistanceMetric metric = DistanceMetric::minkowski(2.0);
  std::vector<ContextFactorSpec> factors;

  void validate() const {
    for (const auto& f : factors) f.validate();
  }
};

/// A query or training point seen by the compound kernel: fitting
/// coordinates plus one context value per factor (factor order).
struct PredictorRef {
  std::span<const double> z;
  std::span<const ContextValue> contexts;
};

/// Per-query state: the bandwidth that scales the fitting distance, and the
/// hop cache when a graph factor is present.
struct WeightState {
  double bandwidth = 1.0;
  const graphs::HopCache* hops = nullptr;
};

/// w = K(d(z_q, z_r)/h) * prod_j factor_j(c_q[j], c_r[j]).
inline double compound_weight(const CompoundKernelSpec& spec, const PredictorRef& query,
                              const PredictorRef& row, const WeightState& state) {
  if (!(state.bandwidth > 0.0)) throw Error("compound_weight: bandwidth must be positive");
  if (query.contexts.size() != spec.factors.size() || row.contexts.size() != spec.factors.size())
    throw DimensionError("compound_weight: one context per factor required");
  const double d = distance(spec.metric, query.z, row.z);
  double w = kernel_weight(spec.kernel, d / state.bandwidth);
  for (std::size_t j = 0; j < spec.factors.size() && w > 0.0; ++j)
    w *= context_factor(spec.factors[j], query.contexts[j], row.contexts[j], state.hops);
  return w;
}

}  // namespace gclpr::kernels
