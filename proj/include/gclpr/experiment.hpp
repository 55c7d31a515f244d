#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gclpr/config.hpp"
#include "gclpr/csv.hpp"
#include "gclpr/data.hpp"
#include "gclpr/error.hpp"
#include "gclpr/estimator.hpp"
#include "gclpr/evaluation.hpp"
#include "gclpr/graphs.hpp"

namespace gclpr::experiment {

using json = nlohmann::ordered_json;

struct ExperimentInputs {
  Dataset data;
  std::shared_ptr<const graphs::Graph> graph;  // null when no graph context
  estimator::Hyperparameters base_hp;
  evaluation::SplitPlan outer = evaluation::SplitPlan::repeated_holdout(5, 0.2, 0);
  evaluation::SplitPlan inner = evaluation::SplitPlan::kfold(4, 0);
  config::GridConfig grid;
  unsigned threads = 1;
};

/// The candidate grid: the cross product of the configured lists, each empty
/// list pinned to the base value. factor_scale rescales the strength of
/// every distance-like context factor (rbf length scales and hop scales).
inline std::vector<evaluation::GridPoint> expand_grid(
    const estimator::Hyperparameters& base, const config::GridConfig& grid) {
  std::vector<std::size_t> neighbors = grid.neighbors;
  if (!neighbors.empty() &&
      base.bandwidth.mode != estimator::BandwidthPolicy::Mode::adaptive_knn)
    throw ConfigError("grid: a neighbors list requires adaptive bandwidth mode");
  if (neighbors.empty()) neighbors.push_back(base.bandwidth.neighbors);
  std::vector<int> degrees = grid.degree;
  if (degrees.empty()) degrees.push_back(base.degree);
  std::vector<double> scales = grid.factor_scale;
  const bool scale_active = !scales.empty();
  if (scale_active) {
    bool any = false;
    for (const auto& f : base.kernel.factors)
      if (f.kind == kernels::ContextFactorSpec::Kind::rbf_over_metric ||
          f.kind == kernels::ContextFactorSpec::Kind::graph_hop)
        any = true;
    if (!any)
      throw ConfigError("grid: factor_scale needs an rbf_over_metric or graph_hop factor");
  } else {
    scales.push_back(1.0);
  }

  std::vector<evaluation::GridPoint> points;
  for (std::size_t k : neighbors)
    for (int degree : degrees)
      for (double scale : scales) {
        evaluation::GridPoint pt;
        pt.hp = base;
        pt.hp.degree = degree;
        std::string label;
        if (pt.hp.bandwidth.mode == estimator::BandwidthPolicy::Mode::adaptive_knn) {
          pt.hp.bandwidth.neighbors = k;
          pt.tie_neighbors = k;
          label = "k=" + std::to_string(k);
        } else {
          label = "h=" + csv::format_double(pt.hp.bandwidth.width);
        }
        label += " p=" + std::to_string(degree);
        pt.tie_degree = degree;
        if (scale_active) {
          if (!(scale > 0.0)) throw ConfigError("grid: factor_scale entries must be positive");
          for (auto& f : pt.hp.kernel.factors) {
            if (f.kind == kernels::ContextFactorSpec::Kind::rbf_over_metric)
              f.length_scale = scale;
            if (f.kind == kernels::ContextFactorSpec::Kind::graph_hop) f.hop_scale = scale;
          }
          label += " s=" + csv::format_double(scale);
        }
        pt.label = std::move(label);
        points.push_back(std::move(pt));
      }
  return points;
}

struct PredictionRow {
  std::string row_id;
  double y_true = 0.0;
  double y_pred = std::numeric_limits<double>::quiet_NaN();  // NaN = failed row
  std::size_t split_index = 0;
};

struct OuterSplitReport {
  std::size_t index = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::string selected_label;
  double selected_inner_rmse = std::numeric_limits<double>::quiet_NaN();
  evaluation::Metrics metrics;
  std::size_t prediction_failures = 0;
};

struct ExperimentReport {
  evaluation::SplitPlan outer;
  evaluation::SplitPlan inner;
  std::vector<std::string> grid_labels;
  std::vector<OuterSplitReport> splits;
  double mean_rmse = 0.0;
  double mean_mae = 0.0;
  double mean_r2 = 0.0;
  bool r2_defined = false;
  std::vector<PredictionRow> predictions;
};

/// Nested evaluation: outer splits measure generalization; when the grid has
/// more than one candidate an inner cross-validated search picks one per
/// outer split using training rows only. Metrics are on the raw response
/// scale. Deterministic in the inputs.
inline ExperimentReport run_experiment(const ExperimentInputs& in) {
  in.data.validate();
  if (!in.data.has_response()) throw DataError("experiment: data has no response");
  const std::vector<evaluation::GridPoint> grid = expand_grid(in.base_hp, in.grid);
  const std::vector<evaluation::IndexSplit> splits =
      evaluation::make_splits(in.data.rows(), in.outer);

  const auto graph = in.graph;
  const evaluation::FitPredict fit_predict =
      [graph](const Dataset& train, const Dataset& test, const evaluation::GridPoint& pt) {
        const auto model = estimator::FittedModel::fit(train, pt.hp, graph);
        const auto res = model.predict(test);
        for (std::size_t i = 0; i < res.errors.size(); ++i)
          if (!res.errors[i].empty()) throw Error("prediction failed: " + res.errors[i]);
        return res.predictions;
      };

  ExperimentReport report;
  report.outer = in.outer;
  report.inner = in.inner;
  for (const auto& pt : grid) report.grid_labels.push_back(pt.label);

  double sum_rmse = 0.0, sum_mae = 0.0, sum_r2 = 0.0;
  std::size_t metric_splits = 0, r2_splits = 0;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    evaluation::check_no_leakage(in.data.rows(), splits[s]);
    const Dataset train = in.data.subset(splits[s].train);
    const Dataset test = in.data.subset(splits[s].test);

    OuterSplitReport rep;
    rep.index = s;
    rep.train_rows = train.rows();
    rep.test_rows = test.rows();

    std::size_t chosen = 0;
    if (grid.size() > 1) {
      const auto search =
          evaluation::grid_search(train, grid, in.inner, fit_predict, in.threads);
      chosen = search.best_index;
      rep.selected_inner_rmse = search.cells[chosen].mean_rmse;
    }
    rep.selected_label = grid[chosen].label;

    const auto model = estimator::FittedModel::fit(train, grid[chosen].hp, graph);
    const auto pred = model.predict(test, in.threads);
    rep.prediction_failures = pred.failures;

    std::vector<double> ok_true, ok_pred;
    for (std::size_t i = 0; i < test.rows(); ++i) {
      PredictionRow row;
      row.row_id = test.row_id(i);
      row.y_true = test.y[i];
      row.y_pred = pred.predictions[i];
      row.split_index = s;
      report.predictions.push_back(std::move(row));
      if (pred.errors[i].empty() && std::isfinite(pred.predictions[i])) {
        ok_true.push_back(test.y[i]);
        ok_pred.push_back(pred.predictions[i]);
      }
    }
    if (ok_true.empty())
      throw Error("experiment: every prediction failed in outer split " + std::to_string(s));
    rep.metrics = evaluation::compute_metrics(ok_true, ok_pred);
    sum_rmse += rep.metrics.rmse;
    sum_mae += rep.metrics.mae;
    ++metric_splits;
    if (rep.metrics.r2_defined) {
      sum_r2 += rep.metrics.r2;
      ++r2_splits;
    }
    report.splits.push_back(std::move(rep));
  }
  report.mean_rmse = sum_rmse / static_cast<double>(metric_splits);
  report.mean_mae = sum_mae / static_cast<double>(metric_splits);
  report.r2_defined = r2_splits == report.splits.size();
  if (report.r2_defined) report.mean_r2 = sum_r2 / static_cast<double>(r2_splits);
  return report;
}

/// Deterministic report serialization; undefined quantities are explicit
/// nulls rather than NaN.
inline json report_to_json(const ExperimentReport& report) {
  json j;
  j["format"] = "gclpr-experiment";
  j["version"] = 1;
  j["outer_split"] = config::split_to_json(report.outer);
  if (report.grid_labels.size() > 1) j["inner_split"] = config::split_to_json(report.inner);
  j["grid"] = report.grid_labels;
  json splits = json::array();
  for (const auto& s : report.splits) {
    json e;
    e["index"] = s.index;
    e["train_rows"] = s.train_rows;
    e["test_rows"] = s.test_rows;
    e["selected"] = s.selected_label;
    e["selected_inner_rmse"] = std::isfinite(s.selected_inner_rmse)
                                   ? json(s.selected_inner_rmse)
                                   : json(nullptr);
    e["rmse"] = s.metrics.rmse;
    e["mae"] = s.metrics.mae;
    e["r2"] = s.metrics.r2_defined ? json(s.metrics.r2) : json(nullptr);
    e["rows_scored"] = s.metrics.count;
    e["prediction_failures"] = s.prediction_failures;
    splits.push_back(std::move(e));
  }
  j["splits"] = std::move(splits);
  json summary;
  summary["mean_rmse"] = report.mean_rmse;
  summary["mean_mae"] = report.mean_mae;
  summary["mean_r2"] = report.r2_defined ? json(report.mean_r2) : json(nullptr);
  j["summary"] = std::move(summary);
  return j;
}

/// Per-row predictions as row_id,y_true,y_pred,abs_error. Fields whose value
/// is unavailable (failed prediction, queries without a response) are empty.
inline csv::CsvTable predictions_to_csv(const std::vector<PredictionRow>& rows) {
  csv::CsvTable table;
  table.header = {"row_id", "y_true", "y_pred", "abs_error"};
  for (const auto& r : rows) {
    std::vector<std::string> out(4);
    out[0] = r.row_id;
    if (std::isfinite(r.y_true)) out[1] = csv::format_double(r.y_true);
    if (std::isfinite(r.y_pred)) out[2] = csv::format_double(r.y_pred);
    if (std::isfinite(r.y_true) && std::isfinite(r.y_pred))
      out[3] = csv::format_double(std::abs(r.y_pred - r.y_true));
    table.rows.push_back(std::move(out));
  }
  return table;
}

}  // namespace gclpr::experiment
