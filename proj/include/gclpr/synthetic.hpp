#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "gclpr/data.hpp"
#include "gclpr/error.hpp"
#include "gclpr/graphs.hpp"
#include "gclpr/rng.hpp"

namespace gclpr::synthetic {

/// Parameters of the random geometric graph scenario.
struct GraphSpec {
  double target_degree = 8.0;
  double weight_min = 1.0;
  double weight_max = 100.0;
  double retain = 0.7;
  double mix = 0.3;
  int diffusion_steps = 7;
  bool require_connected = true;
};

struct ScenarioSpec {
  enum class Kind { sine1d, piecewise_context, contaminated, graph_diffusion };

  Kind kind = Kind::sine1d;
  std::size_t n = 200;
  std::uint64_t seed = 0;
  double sigma = 0.1;

  // piecewise_context
  std::size_t strata = 2;
  std::vector<double> stratum_means;   // defaults to 0, 10, 20, ...
  std::vector<double> stratum_slopes;  // defaults to all zero

  // contaminated
  double outlier_fraction = 0.1;
  double outlier_scale = 8.0;

  // graph_diffusion
  double noise = 0.1;
  GraphSpec graph{};
};

inline const char* to_string(ScenarioSpec::Kind k) {
  switch (k) {
    case ScenarioSpec::Kind::sine1d: return "sine1d";
    case ScenarioSpec::Kind::piecewise_context: return "piecewise_context";
    case ScenarioSpec::Kind::contaminated: return "contaminated";
    case ScenarioSpec::Kind::graph_diffusion: return "graph_diffusion";
  }
  return "?";
}

inline ScenarioSpec::Kind scenario_kind_from_string(const std::string& s) {
  if (s == "sine1d") return ScenarioSpec::Kind::sine1d;
  if (s == "piecewise_context") return ScenarioSpec::Kind::piecewise_context;
  if (s == "contaminated") return ScenarioSpec::Kind::contaminated;
  if (s == "graph_diffusion") return ScenarioSpec::Kind::graph_diffusion;
  throw ConfigError("unknown scenario '" + s + "'");
}

/// A generated dataset plus its noise-free target values; graph scenarios
/// also carry the generating graph, contaminated ones an outlier mask.
struct GeneratedData {
  Dataset data;
  std::vector<double> truth;
  std::shared_ptr<const graphs::Graph> graph;
  std::vector<std::uint8_t> outlier_mask;
};

namespace detail {

inline void standardize_in_place(std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) {
    for (double& x : v) x = 0.0;
    return;
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

inline GeneratedData make_sine1d(const ScenarioSpec& spec) {
  Rng rng(mix_seed(spec.seed, 1));
  GeneratedData out;
  out.data.z = linalg::Matrix(spec.n, 1);
  out.data.y.resize(spec.n);
  out.truth.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double z = rng.uniform();
    out.data.z(i, 0) = z;
    out.truth[i] = std::sin(2.0 * std::numbers::pi * z);
    out.data.y[i] = out.truth[i] + spec.sigma * rng.normal();
  }
  return out;
}

inline GeneratedData make_piecewise(const ScenarioSpec& spec) {
  if (spec.strata < 1) throw ConfigError("piecewise_context: strata must be >= 1");
  std::vector<double> means = spec.stratum_means;
  if (means.empty())
    for (std::size_t s = 0; s < spec.strata; ++s) means.push_back(10.0 * static_cast<double>(s));
  if (means.size() != spec.strata)
    throw ConfigError("piecewise_context: one mean per stratum required");
  std::vector<double> slopes = spec.stratum_slopes;
  if (slopes.empty()) slopes.assign(spec.strata, 0.0);
  if (slopes.size() != spec.strata)
    throw ConfigError("piecewise_context: one slope per stratum required");

  Rng rng(mix_seed(spec.seed, 2));
  GeneratedData out;
  out.data.z = linalg::Matrix(spec.n, 1);
  out.data.y.resize(spec.n);
  out.truth.resize(spec.n);
  ContextChannel stratum;
  stratum.name = "stratum";
  stratum.kind = ContextChannel::Kind::label;
  stratum.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double z = rng.uniform();
    const std::size_t s = rng.index(spec.strata);
    out.data.z(i, 0) = z;
    stratum.labels[i] = "s" + std::to_string(s);
    out.truth[i] = means[s] + slopes[s] * z;
    out.data.y[i] = out.truth[i] + spec.sigma * rng.normal();
  }
  out.data.contexts.push_back(std::move(stratum));
  return out;
}

inline GeneratedData make_contaminated(const ScenarioSpec& spec) {
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction < 1.0))
    throw ConfigError("contaminated: outlier_fraction must be in [0,1)");
  if (!(spec.outlier_scale > 0.0)) throw ConfigError("contaminated: outlier_scale must be positive");
  GeneratedData out = make_sine1d(spec);
  Rng rng(mix_seed(spec.seed, 3));
  std::vector<std::size_t> idx(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) idx[i] = i;
  rng.shuffle(idx);
  const std::size_t n_out =
      static_cast<std::size_t>(spec.outlier_fraction * static_cast<double>(spec.n));
  out.outlier_mask.assign(spec.n, 0);
  // With sigma = 0 the displacement would vanish, so guard with a unit scale.
  const double unit = spec.sigma > 0.0 ? spec.sigma : 1.0;
  for (std::size_t k = 0; k < n_out; ++k) {
    const std::size_t i = idx[k];
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    out.data.y[i] = out.truth[i] + sign * spec.outlier_scale * unit;
    out.outlier_mask[i] = 1;
  }
  return out;
}

inline GeneratedData make_graph_diffusion(const ScenarioSpec& spec) {
  if (spec.n < 2) throw ConfigError("graph_diffusion: need at least two nodes");
  const double radius =
      std::sqrt(spec.graph.target_degree / (static_cast<double>(spec.n) * std::numbers::pi));
  std::shared_ptr<graphs::Graph> graph;
  std::vector<double> xs(spec.n), ys(spec.n);
  const int max_attempts = 200;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(mix_seed(spec.seed, 100 + static_cast<std::uint64_t>(attempt)));
    auto g = std::make_shared<graphs::Graph>();
    for (std::size_t i = 0; i < spec.n; ++i) {
      xs[i] = rng.uniform();
      ys[i] = rng.uniform();
      g->add_node("n" + std::to_string(i));
    }
    const double lw = std::log(spec.graph.weight_min);
    const double hw = std::log(spec.graph.weight_max);
    for (std::size_t i = 0; i < spec.n; ++i)
      for (std::size_t j = i + 1; j < spec.n; ++j) {
        const double dx = xs[i] - xs[j];
        const double dy = ys[i] - ys[j];
        if (std::sqrt(dx * dx + dy * dy) <= radius)
          g->add_edge(g->id_of(i), g->id_of(j), std::exp(lw + (hw - lw) * rng.uniform()));
      }
    if (spec.graph.require_connected) {
      const std::vector<int> hops = graphs::bfs_from(*g, 0);
      bool connected = true;
      for (int h : hops)
        if (h == graphs::kUnreachable) {
          connected = false;
          break;
        }
      if (!connected) continue;
    }
    graph = std::move(g);
    // Node signal comes from the same attempt's stream.
    GeneratedData out;
    std::vector<double> pr = graphs::pagerank(*graph).scores;
    std::vector<double> bw = graphs::betweenness(*graph);
    std::vector<double> deg(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i)
      deg[i] = static_cast<double>(graph->degree(i));
    standardize_in_place(pr);
    standardize_in_place(bw);
    standardize_in_place(deg);
    std::vector<double> base(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i)
      base[i] = 0.3 * pr[i] + 0.5 * bw[i] + 0.2 * deg[i] + spec.noise * rng.normal();
    std::vector<double> y = graphs::diffuse(*graph, base, spec.graph.retain, spec.graph.mix,
                                            spec.graph.diffusion_steps);
    double y_min = y[0];
    for (double v : y) y_min = std::min(y_min, v);
    for (double& v : y) v += 0.1 - y_min;

    out.data.z = linalg::Matrix(spec.n, 5);
    ContextChannel node;
    node.name = "node";
    node.kind = ContextChannel::Kind::label;
    for (std::size_t i = 0; i < spec.n; ++i) {
      out.data.z(i, 0) = pr[i];
      out.data.z(i, 1) = bw[i];
      out.data.z(i, 2) = deg[i];
      out.data.z(i, 3) = xs[i];
      out.data.z(i, 4) = ys[i];
      node.labels.push_back(graph->id_of(i));
    }
    out.data.contexts.push_back(std::move(node));
    out.truth = y;
    out.data.y = std::move(y);
    out.graph = graph;
    return out;
  }
  throw DegenerateError("graph_diffusion: no connected graph after retries");
}

}  // namespace detail

inline GeneratedData generate(const ScenarioSpec& spec) {
  if (spec.n < 1) throw ConfigError("scenario: n must be >= 1");
  if (spec.sigma < 0.0) throw ConfigError("scenario: sigma must be >= 0");
  GeneratedData out;
  switch (spec.kind) {
    case ScenarioSpec::Kind::sine1d:
      out = detail::make_sine1d(spec);
      break;
    case ScenarioSpec::Kind::piecewise_context:
      out = detail::make_piecewise(spec);
      break;
    case ScenarioSpec::Kind::contaminated:
      out = detail::make_contaminated(spec);
      break;
    case ScenarioSpec::Kind::graph_diffusion:
      out = detail::make_graph_diffusion(spec);
      break;
  }
  out.data.row_ids.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    out.data.row_ids.push_back(out.graph ? out.graph->id_of(i) : "r" + std::to_string(i));
    out.data.time.push_back(static_cast<double>(i));
  }
  out.data.validate();
  return out;
}

}  // namespace gclpr::synthetic
