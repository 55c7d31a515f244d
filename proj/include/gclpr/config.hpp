#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gclpr/csv.hpp"
#include "gclpr/error.hpp"
#include "gclpr/estimator.hpp"
#include "gclpr/evaluation.hpp"
#include "gclpr/kernels.hpp"
#include "gclpr/synthetic.hpp"

namespace gclpr::config {

using json = nlohmann::ordered_json;

namespace detail {

inline std::string type_name(const json& j) { return j.type_name(); }

/// Strict whitelist: every key in the object must be in `allowed`.
inline void require_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError("config: '" + path + "' must be an object, got " + type_name(obj));
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + item.key() + "' in '" + path + "'");
  }
}

template <typename T>
T get_as(const json& obj, const std::string& path, const std::string& key) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for '" + path + "." + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& obj, const std::string& path, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return get_as<T>(obj, path, key);
}

inline const json& require_section(const json& obj, const std::string& path,
                                   const std::string& key) {
  if (!obj.contains(key)) throw ConfigError("config: missing section '" + path + "." + key + "'");
  return obj.at(key);
}

}  // namespace detail

inline json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: cannot parse '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Distance metrics
// ---------------------------------------------------------------------------

inline json metric_to_json(const kernels::DistanceMetric& m) {
  json j;
  j["kind"] = kernels::to_string(m.kind);
  switch (m.kind) {
    case kernels::DistanceMetric::Kind::minkowski:
      j["order"] = m.order;
      break;
    case kernels::DistanceMetric::Kind::mahalanobis:
      if (m.precision.rows() > 0) {
        json rows = json::array();
        for (std::size_t r = 0; r < m.precision.rows(); ++r) {
          json row = json::array();
          for (std::size_t c = 0; c < m.precision.cols(); ++c) row.push_back(m.precision(r, c));
          rows.push_back(std::move(row));
        }
        j["precision"] = std::move(rows);
      }
      break;
    case kernels::DistanceMetric::Kind::haversine:
      j["radius"] = m.radius;
      break;
  }
  return j;
}

inline kernels::DistanceMetric parse_metric(const json& j, const std::string& path) {
  detail::require_keys(j, path, {"kind", "order", "precision", "radius"});
  const auto kind = kernels::metric_kind_from_string(
      detail::get_as<std::string>(j, path, "kind"));
  switch (kind) {
    case kernels::DistanceMetric::Kind::minkowski: {
      if (j.contains("precision") || j.contains("radius"))
        throw ConfigError("config: '" + path + "' has keys that do not apply to minkowski");
      double order = 2.0;
      if (j.contains("order")) {
        if (j.at("order").is_string()) {
          if (j.at("order").get<std::string>() != "inf")
            throw ConfigError("config: '" + path + ".order' must be a number or \"inf\"");
          order = std::numeric_limits<double>::infinity();
        } else {
          order = detail::get_as<double>(j, path, "order");
        }
      }
      return kernels::DistanceMetric::minkowski(order);
    }
    case kernels::DistanceMetric::Kind::mahalanobis: {
      if (j.contains("order") || j.contains("radius"))
        throw ConfigError("config: '" + path + "' has keys that do not apply to mahalanobis");
      linalg::Matrix precision;
      if (j.contains("precision")) {
        const auto rows = detail::get_as<std::vector<std::vector<double>>>(j, path, "precision");
        if (rows.empty()) throw ConfigError("config: '" + path + ".precision' is empty");
        precision = linalg::Matrix(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows.front().size())
            throw ConfigError("config: '" + path + ".precision' is ragged");
          for (std::size_t c = 0; c < rows[r].size(); ++c) precision(r, c) = rows[r][c];
        }
      }
      return kernels::DistanceMetric::mahalanobis(std::move(precision));
    }
    case kernels::DistanceMetric::Kind::haversine: {
      if (j.contains("order") || j.contains("precision"))
        throw ConfigError("config: '" + path + "' has keys that do not apply to haversine");
      return kernels::DistanceMetric::haversine(
          detail::get_or<double>(j, path, "radius", kernels::kEarthRadiusKm));
    }
  }
  throw ConfigError("config: unreachable metric kind");
}

// ---------------------------------------------------------------------------
// Context factors
// ---------------------------------------------------------------------------

inline json factor_to_json(const kernels::ContextFactorSpec& f) {
  json j;
  j["kind"] = kernels::to_string(f.kind);
  j["channel"] = f.channel;
  switch (f.kind) {
    case kernels::ContextFactorSpec::Kind::rbf_over_metric:
      j["metric"] = metric_to_json(f.metric);
      j["length_scale"] = f.length_scale;
      break;
    case kernels::ContextFactorSpec::Kind::aitchison_aitken:
      j["lambda"] = f.lambda;
      break;
    case kernels::ContextFactorSpec::Kind::graph_hop:
      j["hop_scale"] = f.hop_scale;
      break;
    case kernels::ContextFactorSpec::Kind::indicator:
      break;
  }
  if (f.temper != 1.0) j["temper"] = f.temper;
  return j;
}

inline kernels::ContextFactorSpec parse_factor(const json& j, const std::string& path) {
  detail::require_keys(j, path,
                       {"kind", "channel", "metric", "length_scale", "lambda", "hop_scale",
                        "temper"});
  const auto kind =
      kernels::factor_kind_from_string(detail::get_as<std::string>(j, path, "kind"));
  const auto channel = detail::get_as<std::string>(j, path, "channel");
  const double temper = detail::get_or<double>(j, path, "temper", 1.0);
  auto forbid = [&](const char* key) {
    if (j.contains(key))
      throw ConfigError("config: '" + path + "." + key + "' does not apply to this factor");
  };
  kernels::ContextFactorSpec f;
  switch (kind) {
    case kernels::ContextFactorSpec::Kind::rbf_over_metric: {
      forbid("lambda");
      forbid("hop_scale");
      kernels::DistanceMetric metric = kernels::DistanceMetric::minkowski(2.0);
      if (j.contains("metric")) metric = parse_metric(j.at("metric"), path + ".metric");
      f = kernels::ContextFactorSpec::rbf(
          channel, std::move(metric), detail::get_as<double>(j, path, "length_scale"), temper);
      break;
    }
    case kernels::ContextFactorSpec::Kind::aitchison_aitken:
      forbid("metric");
      forbid("length_scale");
      forbid("hop_scale");
      f = kernels::ContextFactorSpec::aitchison_aitken(
          channel, detail::get_as<double>(j, path, "lambda"), temper);
      break;
    case kernels::ContextFactorSpec::Kind::graph_hop:
      forbid("metric");
      forbid("length_scale");
      forbid("lambda");
      f = kernels::ContextFactorSpec::graph_hop(
          channel, detail::get_as<double>(j, path, "hop_scale"), temper);
      break;
    case kernels::ContextFactorSpec::Kind::indicator:
      forbid("metric");
      forbid("length_scale");
      forbid("lambda");
      forbid("hop_scale");
      f = kernels::ContextFactorSpec::indicator(channel);
      f.temper = temper;
      break;
  }
  f.validate();
  return f;
}

// ---------------------------------------------------------------------------
// Model hyperparameters
// ---------------------------------------------------------------------------

inline json hyperparameters_to_json(const estimator::Hyperparameters& hp) {
  json j;
  j["degree"] = hp.degree;
  j["kernel"] = kernels::to_string(hp.kernel.kernel);
  j["metric"] = metric_to_json(hp.kernel.metric);
  json bw;
  if (hp.bandwidth.mode == estimator::BandwidthPolicy::Mode::adaptive_knn) {
    bw["mode"] = "adaptive";
    bw["neighbors"] = hp.bandwidth.neighbors;
  } else {
    bw["mode"] = "fixed";
    bw["width"] = hp.bandwidth.width;
  }
  j["bandwidth"] = std::move(bw);
  j["standardize"] = hp.standardize;
  j["ridge_floor"] = hp.ridge_floor;
  j["transform"] = estimator::to_string(hp.transform);
  if (!hp.kernel.factors.empty()) {
    json factors = json::array();
    for (const auto& f : hp.kernel.factors) factors.push_back(factor_to_json(f));
    j["factors"] = std::move(factors);
  }
  if (hp.robust) {
    json robust;
    robust["enabled"] = true;
    if (!hp.robust_spec.chart_columns.empty())
      robust["chart_columns"] = hp.robust_spec.chart_columns;
    robust["k_r"] = hp.robust_spec.k_r;
    robust["bandwidth_multiplier"] = hp.robust_spec.bandwidth_multiplier;
    j["robust"] = std::move(robust);
  }
  return j;
}

inline estimator::Hyperparameters parse_model(const json& j, const std::string& path = "model") {
  detail::require_keys(j, path,
                       {"degree", "kernel", "metric", "bandwidth", "standardize", "ridge_floor",
                        "transform", "factors", "robust"});
  estimator::Hyperparameters hp;
  hp.degree = detail::get_or<int>(j, path, "degree", 1);
  if (j.contains("kernel"))
    hp.kernel.kernel = kernels::smoothing_kernel_from_string(
        detail::get_as<std::string>(j, path, "kernel"));
  if (j.contains("metric")) hp.kernel.metric = parse_metric(j.at("metric"), path + ".metric");
  if (j.contains("bandwidth")) {
    const json& bw = j.at("bandwidth");
    const std::string bw_path = path + ".bandwidth";
    detail::require_keys(bw, bw_path, {"mode", "neighbors", "width"});
    const auto mode = detail::get_as<std::string>(bw, bw_path, "mode");
    if (mode == "adaptive") {
      if (bw.contains("width"))
        throw ConfigError("config: '" + bw_path + ".width' does not apply to adaptive mode");
      hp.bandwidth = estimator::BandwidthPolicy::adaptive(
          detail::get_or<std::size_t>(bw, bw_path, "neighbors", 30));
    } else if (mode == "fixed") {
      if (bw.contains("neighbors"))
        throw ConfigError("config: '" + bw_path + ".neighbors' does not apply to fixed mode");
      hp.bandwidth =
          estimator::BandwidthPolicy::fixed(detail::get_as<double>(bw, bw_path, "width"));
    } else {
      throw ConfigError("config: '" + bw_path + ".mode' must be 'adaptive' or 'fixed'");
    }
  }
  hp.standardize = detail::get_or<bool>(j, path, "standardize", true);
  hp.ridge_floor = detail::get_or<double>(j, path, "ridge_floor", 1e-8);
  if (j.contains("transform"))
    hp.transform = estimator::response_transform_from_string(
        detail::get_as<std::string>(j, path, "transform"));
  if (j.contains("factors")) {
    const json& factors = j.at("factors");
    if (!factors.is_array())
      throw ConfigError("config: '" + path + ".factors' must be an array");
    for (std::size_t i = 0; i < factors.size(); ++i)
      hp.kernel.factors.push_back(
          parse_factor(factors.at(i), path + ".factors[" + std::to_string(i) + "]"));
  }
  if (j.contains("robust")) {
    const json& robust = j.at("robust");
    const std::string rpath = path + ".robust";
    detail::require_keys(robust, rpath,
                         {"enabled", "chart_columns", "k_r", "bandwidth_multiplier"});
    hp.robust = detail::get_or<bool>(robust, rpath, "enabled", true);
    hp.robust_spec.chart_columns =
        detail::get_or<std::vector<std::size_t>>(robust, rpath, "chart_columns", {});
    hp.robust_spec.k_r = detail::get_or<std::size_t>(robust, rpath, "k_r", 20);
    hp.robust_spec.bandwidth_multiplier =
        detail::get_or<double>(robust, rpath, "bandwidth_multiplier", 1.0);
  }
  return hp;
}

// ---------------------------------------------------------------------------
// Dataset schema
// ---------------------------------------------------------------------------

inline json schema_to_json(const csv::DatasetSchema& s) {
  json j;
  j["z"] = s.z_columns;
  if (!s.numeric_contexts.empty()) {
    json arr = json::array();
    for (const auto& c : s.numeric_contexts) {
      json e;
      e["name"] = c.name;
      e["columns"] = c.columns;
      arr.push_back(std::move(e));
    }
    j["numeric_context"] = std::move(arr);
  }
  if (!s.label_contexts.empty()) j["label_context"] = s.label_contexts;
  if (!s.response.empty()) j["response"] = s.response;
  if (!s.row_id.empty()) j["row_id"] = s.row_id;
  if (!s.time.empty()) j["time"] = s.time;
  return j;
}

inline csv::DatasetSchema parse_schema(const json& j, const std::string& path = "data.schema") {
  detail::require_keys(j, path,
                       {"z", "numeric_context", "label_context", "response", "row_id", "time"});
  csv::DatasetSchema s;
  s.z_columns = detail::get_as<std::vector<std::string>>(j, path, "z");
  if (j.contains("numeric_context")) {
    const json& arr = j.at("numeric_context");
    if (!arr.is_array())
      throw ConfigError("config: '" + path + ".numeric_context' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& e = arr.at(i);
      const std::string epath = path + ".numeric_context[" + std::to_string(i) + "]";
      csv::NumericContextSpec spec;
      if (e.is_string()) {
        spec.name = e.get<std::string>();
        spec.columns = {spec.name};
      } else {
        detail::require_keys(e, epath, {"name", "columns"});
        spec.name = detail::get_as<std::string>(e, epath, "name");
        spec.columns = detail::get_as<std::vector<std::string>>(e, epath, "columns");
      }
      s.numeric_contexts.push_back(std::move(spec));
    }
  }
  s.label_contexts =
      detail::get_or<std::vector<std::string>>(j, path, "label_context", {});
  s.response = detail::get_or<std::string>(j, path, "response", "");
  s.row_id = detail::get_or<std::string>(j, path, "row_id", "");
  s.time = detail::get_or<std::string>(j, path, "time", "");
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation protocol
// ---------------------------------------------------------------------------

inline json split_to_json(const evaluation::SplitPlan& p) {
  json j;
  j["kind"] = evaluation::to_string(p.kind);
  switch (p.kind) {
    case evaluation::SplitPlan::Kind::repeated_holdout:
      j["repetitions"] = p.repetitions;
      j["test_fraction"] = p.test_fraction;
      j["seed"] = p.seed;
      break;
    case evaluation::SplitPlan::Kind::kfold:
      j["folds"] = p.folds;
      j["seed"] = p.seed;
      break;
    case evaluation::SplitPlan::Kind::rolling_origin:
      j["outer_splits"] = p.outer_splits;
      break;
  }
  return j;
}

inline evaluation::SplitPlan parse_split(const json& j, const std::string& path) {
  detail::require_keys(
      j, path, {"kind", "repetitions", "test_fraction", "folds", "outer_splits", "seed"});
  const auto kind =
      evaluation::split_kind_from_string(detail::get_as<std::string>(j, path, "kind"));
  auto forbid = [&](const char* key) {
    if (j.contains(key))
      throw ConfigError("config: '" + path + "." + key + "' does not apply to this split kind");
  };
  switch (kind) {
    case evaluation::SplitPlan::Kind::repeated_holdout:
      forbid("folds");
      forbid("outer_splits");
      return evaluation::SplitPlan::repeated_holdout(
          detail::get_or<std::size_t>(j, path, "repetitions", 5),
          detail::get_or<double>(j, path, "test_fraction", 0.2),
          detail::get_or<std::uint64_t>(j, path, "seed", 0));
    case evaluation::SplitPlan::Kind::kfold:
      forbid("repetitions");
      forbid("test_fraction");
      forbid("outer_splits");
      return evaluation::SplitPlan::kfold(detail::get_or<std::size_t>(j, path, "folds", 5),
                                          detail::get_or<std::uint64_t>(j, path, "seed", 0));
    case evaluation::SplitPlan::Kind::rolling_origin:
      forbid("repetitions");
      forbid("test_fraction");
      forbid("folds");
      forbid("seed");
      return evaluation::SplitPlan::rolling_origin(
          detail::get_or<std::size_t>(j, path, "outer_splits", 5));
  }
  throw ConfigError("config: unreachable split kind");
}

/// Candidate lists for model selection; an empty list keeps the base value.
struct GridConfig {
  std::vector<std::size_t> neighbors;
  std::vector<int> degree;
  std::vector<double> factor_scale;
};

inline GridConfig parse_grid(const json& j, const std::string& path) {
  detail::require_keys(j, path, {"neighbors", "degree", "factor_scale"});
  GridConfig g;
  g.neighbors = detail::get_or<std::vector<std::size_t>>(j, path, "neighbors", {});
  g.degree = detail::get_or<std::vector<int>>(j, path, "degree", {});
  g.factor_scale = detail::get_or<std::vector<double>>(j, path, "factor_scale", {});
  return g;
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

inline synthetic::ScenarioSpec parse_generate(const json& j,
                                              const std::string& path = "generate") {
  detail::require_keys(j, path,
                       {"scenario", "n", "seed", "sigma", "strata", "stratum_means",
                        "stratum_slopes", "outlier_fraction", "outlier_scale", "noise",
                        "graph"});
  synthetic::ScenarioSpec spec;
  spec.kind = synthetic::scenario_kind_from_string(
      detail::get_as<std::string>(j, path, "scenario"));
  spec.n = detail::get_or<std::size_t>(j, path, "n", spec.n);
  spec.seed = detail::get_or<std::uint64_t>(j, path, "seed", spec.seed);
  spec.sigma = detail::get_or<double>(j, path, "sigma", spec.sigma);
  spec.strata = detail::get_or<std::size_t>(j, path, "strata", spec.strata);
  spec.stratum_means = detail::get_or<std::vector<double>>(j, path, "stratum_means", {});
  spec.stratum_slopes = detail::get_or<std::vector<double>>(j, path, "stratum_slopes", {});
  spec.outlier_fraction =
      detail::get_or<double>(j, path, "outlier_fraction", spec.outlier_fraction);
  spec.outlier_scale = detail::get_or<double>(j, path, "outlier_scale", spec.outlier_scale);
  spec.noise = detail::get_or<double>(j, path, "noise", spec.noise);
  if (j.contains("graph")) {
    const json& g = j.at("graph");
    const std::string gpath = path + ".graph";
    detail::require_keys(g, gpath,
                         {"target_degree", "weight_min", "weight_max", "retain", "mix",
                          "diffusion_steps", "require_connected"});
    spec.graph.target_degree =
        detail::get_or<double>(g, gpath, "target_degree", spec.graph.target_degree);
    spec.graph.weight_min = detail::get_or<double>(g, gpath, "weight_min", spec.graph.weight_min);
    spec.graph.weight_max = detail::get_or<double>(g, gpath, "weight_max", spec.graph.weight_max);
    spec.graph.retain = detail::get_or<double>(g, gpath, "retain", spec.graph.retain);
    spec.graph.mix = detail::get_or<double>(g, gpath, "mix", spec.graph.mix);
    spec.graph.diffusion_steps =
        detail::get_or<int>(g, gpath, "diffusion_steps", spec.graph.diffusion_steps);
    spec.graph.require_connected =
        detail::get_or<bool>(g, gpath, "require_connected", spec.graph.require_connected);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Whole-run configuration
// ---------------------------------------------------------------------------

struct DataConfig {
  std::string train_csv;
  std::string graph_csv;  // empty = none
  csv::DatasetSchema schema;
};

struct EvalConfig {
  evaluation::SplitPlan outer = evaluation::SplitPlan::repeated_holdout(5, 0.2, 0);
  evaluation::SplitPlan inner = evaluation::SplitPlan::kfold(4, 0);
  GridConfig grid;
};

struct RunConfig {
  std::optional<DataConfig> data;
  std::optional<estimator::Hyperparameters> model;
  std::optional<EvalConfig> evaluation;
  std::optional<synthetic::ScenarioSpec> generate;
};

inline RunConfig parse_run_config(const json& j) {
  detail::require_keys(j, "(root)", {"data", "model", "evaluation", "generate"});
  RunConfig cfg;
  if (j.contains("data")) {
    const json& d = j.at("data");
    detail::require_keys(d, "data", {"train_csv", "graph_csv", "schema"});
    DataConfig dc;
    dc.train_csv = detail::get_as<std::string>(d, "data", "train_csv");
    dc.graph_csv = detail::get_or<std::string>(d, "data", "graph_csv", "");
    dc.schema = parse_schema(detail::require_section(d, "data", "schema"));
    cfg.data = std::move(dc);
  }
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    detail::require_keys(e, "evaluation", {"split", "inner_split", "grid"});
    EvalConfig ec;
    if (e.contains("split")) ec.outer = parse_split(e.at("split"), "evaluation.split");
    if (e.contains("inner_split"))
      ec.inner = parse_split(e.at("inner_split"), "evaluation.inner_split");
    if (e.contains("grid")) ec.grid = parse_grid(e.at("grid"), "evaluation.grid");
    cfg.evaluation = std::move(ec);
  }
  if (j.contains("generate")) cfg.generate = parse_generate(j.at("generate"));
  return cfg;
}

}  // namespace gclpr::config
