#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "gclpr/config.hpp"
#include "gclpr/csv.hpp"
#include "gclpr/data.hpp"
#include "gclpr/error.hpp"
#include "gclpr/estimator.hpp"
#include "gclpr/graphs.hpp"

namespace gclpr::model_io {

using json = nlohmann::ordered_json;

inline constexpr const char* kFormatName = "gclpr-model";
inline constexpr int kFormatVersion = 1;

/// Everything needed to reproduce a fitted model exactly: the training
/// table, the hyperparameters, the optional graph, and the CSV schema used
/// to read prediction inputs.
struct ModelArtifact {
  Dataset data;
  estimator::Hyperparameters hp;
  std::optional<graphs::Graph> graph;
  csv::DatasetSchema schema;
};

inline json artifact_to_json(const ModelArtifact& art) {
  art.data.validate();
  if (!art.data.has_response()) throw DataError("model artifact: training data has no response");
  json j;
  j["format"] = kFormatName;
  j["version"] = kFormatVersion;
  j["schema"] = config::schema_to_json(art.schema);
  j["hyperparameters"] = config::hyperparameters_to_json(art.hp);

  json data;
  json z = json::array();
  for (std::size_t r = 0; r < art.data.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < art.data.dim(); ++c) row.push_back(art.data.z(r, c));
    z.push_back(std::move(row));
  }
  data["z"] = std::move(z);
  if (!art.data.contexts.empty()) {
    json contexts = json::array();
    for (const auto& ch : art.data.contexts) {
      json c;
      c["name"] = ch.name;
      if (ch.kind == ContextChannel::Kind::label) {
        c["kind"] = "label";
        c["values"] = ch.labels;
      } else {
        c["kind"] = "numeric";
        c["values"] = ch.numeric;
      }
      contexts.push_back(std::move(c));
    }
    data["contexts"] = std::move(contexts);
  }
  data["y"] = art.data.y;
  if (!art.data.row_ids.empty()) data["row_ids"] = art.data.row_ids;
  if (!art.data.time.empty()) data["time"] = art.data.time;
  j["data"] = std::move(data);

  if (art.graph) {
    json g;
    g["nodes"] = art.graph->ids();
    json edges = json::array();
    for (std::size_t u = 0; u < art.graph->ids().size(); ++u)
      for (const auto& [v, w] : art.graph->neighbors(u))
        if (static_cast<std::size_t>(v) > u) {
          json e = json::array();
          e.push_back(art.graph->id_of(u));
          e.push_back(art.graph->id_of(static_cast<std::size_t>(v)));
          e.push_back(w);
          edges.push_back(std::move(e));
        }
    g["edges"] = std::move(edges);
    j["graph"] = std::move(g);
  }
  return j;
}

inline ModelArtifact artifact_from_json(const json& j) {
  config::detail::require_keys(
      j, "(model)", {"format", "version", "schema", "hyperparameters", "data", "graph"});
  if (config::detail::get_or<std::string>(j, "(model)", "format", "") != kFormatName)
    throw IoError("model artifact: unrecognized format tag");
  const int version = config::detail::get_or<int>(j, "(model)", "version", -1);
  if (version != kFormatVersion)
    throw IoError("model artifact: unsupported version " + std::to_string(version));

  ModelArtifact art;
  art.schema = config::parse_schema(
      config::detail::require_section(j, "(model)", "schema"), "(model).schema");
  art.hp = config::parse_model(
      config::detail::require_section(j, "(model)", "hyperparameters"),
      "(model).hyperparameters");

  const json& data = config::detail::require_section(j, "(model)", "data");
  config::detail::require_keys(data, "(model).data",
                               {"z", "contexts", "y", "row_ids", "time"});
  const auto z =
      config::detail::get_as<std::vector<std::vector<double>>>(data, "(model).data", "z");
  if (z.empty()) throw DataError("model artifact: empty training table");
  art.data.z = linalg::Matrix(z.size(), z.front().size());
  for (std::size_t r = 0; r < z.size(); ++r) {
    if (z[r].size() != z.front().size())
      throw DataError("model artifact: ragged fitting coordinates");
    for (std::size_t c = 0; c < z[r].size(); ++c) art.data.z(r, c) = z[r][c];
  }
  if (data.contains("contexts")) {
    const json& contexts = data.at("contexts");
    if (!contexts.is_array()) throw DataError("model artifact: contexts must be an array");
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      const json& c = contexts.at(i);
      const std::string path = "(model).data.contexts[" + std::to_string(i) + "]";
      config::detail::require_keys(c, path, {"name", "kind", "values"});
      ContextChannel ch;
      ch.name = config::detail::get_as<std::string>(c, path, "name");
      const auto kind = config::detail::get_as<std::string>(c, path, "kind");
      if (kind == "label") {
        ch.kind = ContextChannel::Kind::label;
        ch.labels = config::detail::get_as<std::vector<std::string>>(c, path, "values");
      } else if (kind == "numeric") {
        ch.kind = ContextChannel::Kind::numeric;
        ch.numeric =
            config::detail::get_as<std::vector<std::vector<double>>>(c, path, "values");
      } else {
        throw DataError("model artifact: unknown context kind '" + kind + "'");
      }
      art.data.contexts.push_back(std::move(ch));
    }
  }
  art.data.y = config::detail::get_as<std::vector<double>>(data, "(model).data", "y");
  art.data.row_ids =
      config::detail::get_or<std::vector<std::string>>(data, "(model).data", "row_ids", {});
  art.data.time =
      config::detail::get_or<std::vector<double>>(data, "(model).data", "time", {});
  art.data.validate();

  if (j.contains("graph")) {
    const json& g = j.at("graph");
    config::detail::require_keys(g, "(model).graph", {"nodes", "edges"});
    graphs::Graph graph;
    for (const auto& id :
         config::detail::get_as<std::vector<std::string>>(g, "(model).graph", "nodes"))
      graph.add_node(id);
    if (g.contains("edges")) {
      const json& edges = g.at("edges");
      if (!edges.is_array()) throw DataError("model artifact: graph edges must be an array");
      for (const auto& e : edges) {
        if (!e.is_array() || e.size() != 3)
          throw DataError("model artifact: each edge must be [src, dst, weight]");
        graph.add_edge(e.at(0).get<std::string>(), e.at(1).get<std::string>(),
                       e.at(2).get<double>());
      }
    }
    art.graph = std::move(graph);
  }
  return art;
}

inline void save_model(const std::string& path, const ModelArtifact& art) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << artifact_to_json(art).dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model artifact: cannot parse '" + path + "': " + std::string(e.what()));
  }
  return artifact_from_json(j);
}

/// Rebuilds the fitted model from an artifact. Fitting is deterministic in
/// the stored inputs, so the refit model predicts identically to the one
/// that was saved.
inline estimator::FittedModel refit(const ModelArtifact& art) {
  std::shared_ptr<const graphs::Graph> graph;
  if (art.graph) graph = std::make_shared<const graphs::Graph>(*art.graph);
  return estimator::FittedModel::fit(art.data, art.hp, std::move(graph));
}

}  // namespace gclpr::model_io
