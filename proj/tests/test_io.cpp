#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gclpr/commands.hpp"
#include "gclpr/config.hpp"
#include "gclpr/csv.hpp"
#include "gclpr/experiment.hpp"
#include "gclpr/model_io.hpp"
#include "gclpr/synthetic.hpp"

using namespace gclpr;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

/// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gclpr_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

Dataset small_dataset() {
  Dataset d;
  d.z = linalg::Matrix(4, 2);
  const double zs[4][2] = {{0.0, 1.0}, {0.5, -1.0}, {1.0, 0.25}, {1.5, 2.0}};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) d.z(r, c) = zs[r][c];
  ContextChannel scalar;
  scalar.name = "temp";
  scalar.kind = ContextChannel::Kind::numeric;
  scalar.numeric = {{10.0}, {11.5}, {9.25}, {12.0}};
  d.contexts.push_back(scalar);
  ContextChannel wide;
  wide.name = "loc";
  wide.kind = ContextChannel::Kind::numeric;
  wide.numeric = {{40.0, -74.0}, {40.5, -73.5}, {41.0, -74.25}, {39.75, -73.0}};
  d.contexts.push_back(wide);
  ContextChannel label;
  label.name = "group";
  label.kind = ContextChannel::Kind::label;
  label.labels = {"a", "b", "a", "c"};
  d.contexts.push_back(label);
  d.y = {1.0, 2.5, -0.75, 1.0 / 3.0};
  d.row_ids = {"r0", "r1", "r2", "r3"};
  d.time = {0.0, 1.0, 2.0, 3.0};
  return d;
}

}  // namespace

TEST_CASE("csv round trips quoting and embedded structure", "[io]") {
  csv::CsvTable table;
  table.header = {"id", "note"};
  table.rows = {{"a,b", "say \"hi\""}, {"line\nbreak", "plain"}, {"", "trailing,comma,"}};
  std::ostringstream out;
  csv::write_csv(out, table);
  std::istringstream in(out.str());
  const csv::CsvTable back = csv::read_csv(in);
  REQUIRE(back.header == table.header);
  REQUIRE(back.rows == table.rows);

  std::istringstream crlf("a,b\r\n1,2\r\n");
  const csv::CsvTable win = csv::read_csv(crlf);
  REQUIRE(win.rows.size() == 1);
  CHECK(win.rows[0] == std::vector<std::string>{"1", "2"});

  std::istringstream no_trailing_newline("a,b\n1,2");
  const csv::CsvTable open_end = csv::read_csv(no_trailing_newline);
  REQUIRE(open_end.rows.size() == 1);
  CHECK(open_end.rows[0][1] == "2");
}

TEST_CASE("csv rejects malformed input", "[io]") {
  std::istringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(csv::read_csv(ragged), DataError);
  std::istringstream unterminated("a,b\n\"oops,2\n");
  CHECK_THROWS_AS(csv::read_csv(unterminated), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS(csv::read_csv(empty), DataError);
  csv::CsvTable table;
  table.header = {"x"};
  CHECK_THROWS_AS(table.column("missing"), DataError);
  CHECK_THROWS_AS(csv::parse_double("abc", "here"), DataError);
  CHECK_THROWS_AS(csv::parse_double("1.5x", "here"), DataError);
  CHECK(csv::parse_double("1.5e3", "here") == 1500.0);
}

TEST_CASE("doubles survive a text round trip exactly", "[io]") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.123456789,
                   6371.0088, -0.0, 2.0}) {
    const std::string s = csv::format_double(v);
    CHECK(csv::parse_double(s, "round trip") == v);
  }
}

TEST_CASE("dataset csv round trip preserves every field", "[io]") {
  const Dataset d = small_dataset();
  const csv::CsvTable table = csv::dataset_to_csv(d);
  REQUIRE(table.header ==
          std::vector<std::string>{"row_id", "time", "z0", "z1", "temp", "loc_0", "loc_1",
                                   "group", "y"});
  const csv::DatasetSchema schema = csv::schema_for(d);
  const Dataset back = csv::dataset_from_csv(table, schema, true);
  REQUIRE(back.rows() == d.rows());
  REQUIRE(back.dim() == d.dim());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.dim(); ++c) CHECK(back.z(r, c) == d.z(r, c));
    CHECK(back.y[r] == d.y[r]);
    CHECK(back.time[r] == d.time[r]);
    CHECK(back.row_ids[r] == d.row_ids[r]);
  }
  CHECK(back.require_context("group").labels == d.require_context("group").labels);
  CHECK(back.require_context("loc").numeric == d.require_context("loc").numeric);
  CHECK(back.require_context("temp").numeric == d.require_context("temp").numeric);

  // The same schema with require_response=false degrades gracefully when the
  // response column is dropped.
  csv::CsvTable headless = table;
  for (auto& row : headless.rows) row.pop_back();
  headless.header.pop_back();
  const Dataset no_y = csv::dataset_from_csv(headless, schema, false);
  CHECK_FALSE(no_y.has_response());
  CHECK_THROWS_AS(csv::dataset_from_csv(headless, schema, true), DataError);
}

TEST_CASE("graph csv round trip preserves weights", "[io]") {
  graphs::Graph g;
  g.add_edge("a", "b", 2.5);
  g.add_edge("b", "c", 0.5);
  g.add_edge("a", "c", 7.0);
  const csv::CsvTable table = csv::graph_to_csv(g);
  REQUIRE(table.rows.size() == 3);
  const graphs::Graph back = csv::graph_from_csv(table);
  CHECK(back.edge_weight(back.require_index("a"), back.require_index("b")) == 2.5);
  CHECK(back.edge_weight(back.require_index("b"), back.require_index("c")) == 0.5);
  CHECK(back.edge_weight(back.require_index("a"), back.require_index("c")) == 7.0);

  csv::CsvTable unweighted;
  unweighted.header = {"src", "dst"};
  unweighted.rows = {{"x", "y"}};
  const graphs::Graph simple = csv::graph_from_csv(unweighted);
  CHECK(simple.edge_weight(simple.require_index("x"), simple.require_index("y")) == 1.0);
}

TEST_CASE("config rejects unknown keys anywhere", "[io]") {
  using config::json;
  CHECK_THROWS_AS(config::parse_run_config(json::parse(R"({"modle": {}})")), ConfigError);
  CHECK_THROWS_AS(config::parse_model(json::parse(R"({"degre": 1})")), ConfigError);
  CHECK_THROWS_AS(
      config::parse_model(json::parse(R"({"bandwidth": {"mode": "adaptive", "width": 2}})")),
      ConfigError);
  CHECK_THROWS_AS(
      config::parse_model(json::parse(R"({"bandwidth": {"mode": "nearest"}})")), ConfigError);
  CHECK_THROWS_AS(
      config::parse_metric(json::parse(R"({"kind": "minkowski", "radius": 2})"), "m"),
      ConfigError);
  CHECK_THROWS_AS(
      config::parse_factor(
          json::parse(R"({"kind": "rbf_over_metric", "channel": "c", "lambda": 0.5})"), "f"),
      ConfigError);
  CHECK_THROWS_AS(config::parse_schema(json::parse(R"({"z": ["z0"], "respons": "y"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      config::parse_split(json::parse(R"({"kind": "kfold", "test_fraction": 0.5})"), "s"),
      ConfigError);
  CHECK_THROWS_AS(
      config::parse_split(json::parse(R"({"kind": "rolling_origin", "seed": 3})"), "s"),
      ConfigError);
  // Type errors carry the offending path.
  try {
    config::parse_model(config::json::parse(R"({"degree": "one"})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.degree") != std::string::npos);
  }
}

TEST_CASE("config parses a complete model section", "[io]") {
  const auto j = config::json::parse(R"({
    "degree": 2,
    "kernel": "laplacian",
    "metric": {"kind": "mahalanobis", "precision": [[2.0, 0.0], [0.0, 1.0]]},
    "bandwidth": {"mode": "fixed", "width": 0.75},
    "standardize": false,
    "ridge_floor": 1e-6,
    "transform": "log1p",
    "factors": [
      {"kind": "rbf_over_metric", "channel": "loc",
       "metric": {"kind": "haversine", "radius": 10.0}, "length_scale": 25.0, "temper": 0.5},
      {"kind": "aitchison_aitken", "channel": "group", "lambda": 0.3},
      {"kind": "graph_hop", "channel": "node", "hop_scale": 0.75},
      {"kind": "indicator", "channel": "group"}
    ],
    "robust": {"enabled": true, "chart_columns": [0], "k_r": 12, "bandwidth_multiplier": 1.5}
  })");
  const estimator::Hyperparameters hp = config::parse_model(j);
  CHECK(hp.degree == 2);
  CHECK(hp.kernel.kernel == kernels::SmoothingKernel::laplacian);
  CHECK(hp.kernel.metric.kind == kernels::DistanceMetric::Kind::mahalanobis);
  CHECK(hp.kernel.metric.precision(0, 0) == 2.0);
  CHECK(hp.bandwidth.mode == estimator::BandwidthPolicy::Mode::fixed);
  CHECK(hp.bandwidth.width == 0.75);
  CHECK_FALSE(hp.standardize);
  CHECK(hp.ridge_floor == 1e-6);
  CHECK(hp.transform == estimator::ResponseTransform::log1p);
  REQUIRE(hp.kernel.factors.size() == 4);
  CHECK(hp.kernel.factors[0].kind == kernels::ContextFactorSpec::Kind::rbf_over_metric);
  CHECK(hp.kernel.factors[0].metric.kind == kernels::DistanceMetric::Kind::haversine);
  CHECK(hp.kernel.factors[0].metric.radius == 10.0);
  CHECK(hp.kernel.factors[0].length_scale == 25.0);
  CHECK(hp.kernel.factors[0].temper == 0.5);
  CHECK(hp.kernel.factors[1].lambda == 0.3);
  CHECK(hp.kernel.factors[2].hop_scale == 0.75);
  CHECK(hp.kernel.factors[3].kind == kernels::ContextFactorSpec::Kind::indicator);
  CHECK(hp.robust);
  CHECK(hp.robust_spec.chart_columns == std::vector<std::size_t>{0});
  CHECK(hp.robust_spec.k_r == 12);
  CHECK(hp.robust_spec.bandwidth_multiplier == 1.5);

  const auto inf =
      config::parse_metric(config::json::parse(R"({"kind":"minkowski","order":"inf"})"), "m");
  CHECK(std::isinf(inf.order));
  CHECK_THROWS_AS(
      config::parse_metric(config::json::parse(R"({"kind":"minkowski","order":"sup"})"), "m"),
      ConfigError);
}

TEST_CASE("hyperparameters survive a json round trip", "[io]") {
  estimator::Hyperparameters hp;
  hp.degree = 3;
  hp.kernel.kernel = kernels::SmoothingKernel::gaussian;
  hp.kernel.metric = kernels::DistanceMetric::minkowski(1.0);
  hp.bandwidth = estimator::BandwidthPolicy::adaptive(42);
  hp.standardize = true;
  hp.ridge_floor = 1e-7;
  hp.transform = estimator::ResponseTransform::log1p;
  hp.kernel.factors.push_back(kernels::ContextFactorSpec::rbf(
      "loc", kernels::DistanceMetric::haversine(100.0), 5.0, 0.8));
  hp.kernel.factors.push_back(kernels::ContextFactorSpec::aitchison_aitken("g", 0.25, 0.9));
  hp.robust = true;
  hp.robust_spec.chart_columns = {0, 1};
  hp.robust_spec.k_r = 9;
  hp.robust_spec.bandwidth_multiplier = 2.0;

  const estimator::Hyperparameters back =
      config::parse_model(config::hyperparameters_to_json(hp));
  CHECK(back.degree == hp.degree);
  CHECK(back.kernel.kernel == hp.kernel.kernel);
  CHECK(back.kernel.metric.kind == hp.kernel.metric.kind);
  CHECK(back.kernel.metric.order == hp.kernel.metric.order);
  CHECK(back.bandwidth.mode == hp.bandwidth.mode);
  CHECK(back.bandwidth.neighbors == hp.bandwidth.neighbors);
  CHECK(back.ridge_floor == hp.ridge_floor);
  CHECK(back.transform == hp.transform);
  REQUIRE(back.kernel.factors.size() == 2);
  CHECK(back.kernel.factors[0].metric.radius == 100.0);
  CHECK(back.kernel.factors[0].length_scale == 5.0);
  CHECK(back.kernel.factors[0].temper == 0.8);
  CHECK(back.kernel.factors[1].lambda == 0.25);
  CHECK(back.robust == hp.robust);
  CHECK(back.robust_spec.chart_columns == hp.robust_spec.chart_columns);
  CHECK(back.robust_spec.k_r == hp.robust_spec.k_r);
  CHECK(back.robust_spec.bandwidth_multiplier == hp.robust_spec.bandwidth_multiplier);
}

TEST_CASE("split grid and scenario sections parse", "[io]") {
  const auto holdout = config::parse_split(
      config::json::parse(R"({"kind":"repeated_holdout","repetitions":7,"seed":11})"), "s");
  CHECK(holdout.repetitions == 7);
  CHECK(holdout.test_fraction == 0.2);
  CHECK(holdout.seed == 11);

  const auto rolling = config::parse_split(
      config::json::parse(R"({"kind":"rolling_origin","outer_splits":4})"), "s");
  CHECK(rolling.outer_splits == 4);

  const auto grid = config::parse_grid(
      config::json::parse(R"({"neighbors":[10,20],"degree":[0,1],"factor_scale":[0.5]})"),
      "g");
  CHECK(grid.neighbors == std::vector<std::size_t>{10, 20});
  CHECK(grid.degree == std::vector<int>{0, 1});
  CHECK(grid.factor_scale == std::vector<double>{0.5});

  const auto spec = config::parse_generate(config::json::parse(R"({
    "scenario": "contaminated", "n": 77, "seed": 5, "sigma": 0.3,
    "outlier_fraction": 0.2, "outlier_scale": 6.0
  })"));
  CHECK(spec.kind == synthetic::ScenarioSpec::Kind::contaminated);
  CHECK(spec.n == 77);
  CHECK(spec.seed == 5);
  CHECK(spec.sigma == 0.3);
  CHECK(spec.outlier_fraction == 0.2);
  CHECK(spec.outlier_scale == 6.0);
  CHECK_THROWS_AS(config::parse_generate(config::json::parse(R"({"scenario":"mystery"})")),
                  ConfigError);
}

TEST_CASE("model artifact round trips through json", "[io]") {
  model_io::ModelArtifact art;
  art.data = small_dataset();
  art.hp.degree = 1;
  art.hp.kernel.kernel = kernels::SmoothingKernel::tricube;
  art.hp.bandwidth = estimator::BandwidthPolicy::adaptive(3);
  art.hp.kernel.factors.push_back(kernels::ContextFactorSpec::indicator("group"));
  art.schema = csv::schema_for(art.data);
  graphs::Graph g;
  g.add_edge("a", "b", 2.0);
  g.add_node("lonely");
  art.graph = g;

  const auto j = model_io::artifact_to_json(art);
  const model_io::ModelArtifact back = model_io::artifact_from_json(j);
  REQUIRE(back.data.rows() == art.data.rows());
  for (std::size_t r = 0; r < art.data.rows(); ++r) {
    for (std::size_t c = 0; c < art.data.dim(); ++c) CHECK(back.data.z(r, c) == art.data.z(r, c));
    CHECK(back.data.y[r] == art.data.y[r]);
  }
  CHECK(back.data.require_context("group").labels ==
        art.data.require_context("group").labels);
  CHECK(back.hp.degree == art.hp.degree);
  REQUIRE(back.hp.kernel.factors.size() == 1);
  REQUIRE(back.graph.has_value());
  CHECK(back.graph->ids().size() == 3);
  CHECK(back.graph->edge_weight(back.graph->require_index("a"),
                                back.graph->require_index("b")) == 2.0);
  CHECK(back.schema.z_columns == art.schema.z_columns);

  // A refit from the loaded artifact predicts identically to a refit from
  // the original, bit for bit.
  const auto m1 = model_io::refit(art);
  const auto m2 = model_io::refit(back);
  Dataset q = art.data.subset(std::vector<std::size_t>{1, 3});
  q.y.clear();
  const auto p1 = m1.predict(q);
  const auto p2 = m2.predict(q);
  REQUIRE(p1.failures == 0);
  for (std::size_t i = 0; i < p1.predictions.size(); ++i)
    CHECK(p1.predictions[i] == p2.predictions[i]);
}

TEST_CASE("model artifact rejects foreign and future formats", "[io]") {
  model_io::ModelArtifact art;
  art.data = small_dataset();
  art.schema = csv::schema_for(art.data);
  auto j = model_io::artifact_to_json(art);
  auto other = j;
  other["format"] = "other-tool";
  CHECK_THROWS_AS(model_io::artifact_from_json(other), IoError);
  auto future = j;
  future["version"] = 2;
  CHECK_THROWS_AS(model_io::artifact_from_json(future), IoError);
  auto junk = j;
  junk["surprise"] = 1;
  CHECK_THROWS_AS(model_io::artifact_from_json(junk), ConfigError);
}

TEST_CASE("model files save and load", "[io]") {
  TempDir dir;
  model_io::ModelArtifact art;
  art.data = small_dataset();
  art.schema = csv::schema_for(art.data);
  const std::string path = dir.file("model.json");
  model_io::save_model(path, art);
  const model_io::ModelArtifact back = model_io::load_model(path);
  CHECK(back.data.rows() == art.data.rows());
  CHECK_THROWS_AS(model_io::load_model(dir.file("missing.json")), IoError);
  spit(dir.file("garbage.json"), "not json");
  CHECK_THROWS_AS(model_io::load_model(dir.file("garbage.json")), IoError);
}

TEST_CASE("expand grid crosses lists and scales factors", "[io]") {
  estimator::Hyperparameters base;
  base.bandwidth = estimator::BandwidthPolicy::adaptive(30);
  base.degree = 1;
  base.kernel.factors.push_back(
      kernels::ContextFactorSpec::rbf("loc", kernels::DistanceMetric::minkowski(2.0), 1.0));
  base.kernel.factors.push_back(kernels::ContextFactorSpec::graph_hop("node", 1.0));
  base.kernel.factors.push_back(kernels::ContextFactorSpec::indicator("g"));

  config::GridConfig grid;
  grid.neighbors = {10, 20};
  grid.degree = {0, 1};
  grid.factor_scale = {0.5, 1.5};
  const auto points = experiment::expand_grid(base, grid);
  REQUIRE(points.size() == 8);
  CHECK(points[0].label == "k=10 p=0 s=0.5");
  CHECK(points[0].tie_neighbors == 10);
  CHECK(points[0].tie_degree == 0);
  CHECK(points[0].hp.kernel.factors[0].length_scale == 0.5);
  CHECK(points[0].hp.kernel.factors[1].hop_scale == 0.5);
  CHECK(points[7].label == "k=20 p=1 s=1.5");
  CHECK(points[7].hp.kernel.factors[0].length_scale == 1.5);
  // The indicator factor never picks up a scale.
  for (const auto& pt : points)
    CHECK(pt.hp.kernel.factors[2].kind == kernels::ContextFactorSpec::Kind::indicator);

  config::GridConfig empty;
  const auto single = experiment::expand_grid(base, empty);
  REQUIRE(single.size() == 1);
  CHECK(single[0].hp.bandwidth.neighbors == 30);
  CHECK(single[0].label == "k=30 p=1");

  estimator::Hyperparameters fixed = base;
  fixed.bandwidth = estimator::BandwidthPolicy::fixed(0.5);
  config::GridConfig bad;
  bad.neighbors = {10};
  CHECK_THROWS_AS(experiment::expand_grid(fixed, bad), ConfigError);

  estimator::Hyperparameters no_factors;
  config::GridConfig scale_only;
  scale_only.factor_scale = {0.5};
  CHECK_THROWS_AS(experiment::expand_grid(no_factors, scale_only), ConfigError);
}

TEST_CASE("run experiment is deterministic and scores on the raw scale", "[io]") {
  synthetic::ScenarioSpec spec;
  spec.kind = synthetic::ScenarioSpec::Kind::sine1d;
  spec.n = 120;
  spec.seed = 8;
  spec.sigma = 0.05;
  const auto gen = synthetic::generate(spec);

  experiment::ExperimentInputs in;
  in.data = gen.data;
  in.base_hp.bandwidth = estimator::BandwidthPolicy::adaptive(15);
  in.base_hp.kernel.kernel = kernels::SmoothingKernel::tricube;
  in.outer = evaluation::SplitPlan::repeated_holdout(3, 0.25, 5);
  in.inner = evaluation::SplitPlan::kfold(3, 1);
  in.grid.neighbors = {10, 20};
  in.grid.degree = {0, 1};

  const auto r1 = experiment::run_experiment(in);
  const auto r2 = experiment::run_experiment(in);
  CHECK(experiment::report_to_json(r1).dump(2) == experiment::report_to_json(r2).dump(2));

  REQUIRE(r1.splits.size() == 3);
  CHECK(r1.grid_labels.size() == 4);
  CHECK(r1.mean_rmse < 0.2);
  CHECK(r1.r2_defined);
  CHECK(r1.mean_r2 > 0.8);
  std::size_t rows = 0;
  for (const auto& s : r1.splits) {
    CHECK(s.train_rows + s.test_rows == 120);
    CHECK(std::isfinite(s.selected_inner_rmse));
    rows += s.test_rows;
  }
  CHECK(r1.predictions.size() == rows);

  const auto table = experiment::predictions_to_csv(r1.predictions);
  REQUIRE(table.header ==
          std::vector<std::string>{"row_id", "y_true", "y_pred", "abs_error"});
  REQUIRE(table.rows.size() == rows);
  for (const auto& row : table.rows) {
    CHECK(!row[1].empty());
    CHECK(!row[2].empty());
    const double err = csv::parse_double(row[3], "abs_error");
    CHECK(err >= 0.0);
  }
}

TEST_CASE("rolling origin experiment scores strictly later rows", "[io]") {
  synthetic::ScenarioSpec spec;
  spec.kind = synthetic::ScenarioSpec::Kind::sine1d;
  spec.n = 60;
  spec.seed = 2;
  spec.sigma = 0.05;
  const auto gen = synthetic::generate(spec);

  experiment::ExperimentInputs in;
  in.data = gen.data;
  in.base_hp.bandwidth = estimator::BandwidthPolicy::adaptive(8);
  in.outer = evaluation::SplitPlan::rolling_origin(3);
  const auto report = experiment::run_experiment(in);
  REQUIRE(report.splits.size() == 3);
  // Blocks end at 30, 45 and 60 of the chronologically ordered rows, so the
  // train window grows while every scored row is later than the window.
  CHECK(report.splits[0].train_rows == 15);
  CHECK(report.splits[1].train_rows == 30);
  CHECK(report.splits[2].train_rows == 45);
  std::size_t at = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t train_rows = report.splits[s].train_rows;
    for (std::size_t i = 0; i < report.splits[s].test_rows; ++i, ++at) {
      const std::string& id = report.predictions[at].row_id;
      REQUIRE(id.substr(0, 1) == "r");
      CHECK(std::stoul(id.substr(1)) >= train_rows);
    }
  }
}

TEST_CASE("response transform flows through the harness exactly", "[io]") {
  // y = exp(2 z) - 1 is affine after log1p, so a local linear fit on the
  // transformed scale is exact and raw-scale test errors vanish.
  Dataset d;
  const std::size_t n = 80;
  d.z = linalg::Matrix(n, 1);
  Rng rng(mix_seed(404, 0));
  for (std::size_t i = 0; i < n; ++i) d.z(i, 0) = rng.uniform();
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = std::exp(2.0 * d.z(i, 0)) - 1.0;

  experiment::ExperimentInputs in;
  in.data = d;
  in.base_hp.degree = 1;
  in.base_hp.bandwidth = estimator::BandwidthPolicy::adaptive(10);
  in.base_hp.transform = estimator::ResponseTransform::log1p;
  in.outer = evaluation::SplitPlan::repeated_holdout(2, 0.25, 9);
  const auto report = experiment::run_experiment(in);
  CHECK(report.mean_rmse < 1e-8);
}

TEST_CASE("generate command writes a usable bundle", "[io]") {
  TempDir dir;
  spit(dir.file("gen.json"), R"({
    "generate": {"scenario": "piecewise_context", "n": 40, "seed": 3,
                  "sigma": 0.05, "strata": 2}
  })");
  commands::GenerateArgs args;
  args.config_path = dir.file("gen.json");
  args.out_dir = dir.file("out");
  std::ostringstream log;
  cmd_generate(args, log);

  const auto meta = config::load_json_file(dir.file("out/meta.json"));
  CHECK(meta.at("format").get<std::string>() == "gclpr-generate");
  CHECK(meta.at("scenario").get<std::string>() == "piecewise_context");
  CHECK(meta.at("n").get<std::size_t>() == 40);

  const csv::DatasetSchema schema = config::parse_schema(meta.at("schema"), "meta.schema");
  const Dataset data =
      csv::dataset_from_csv(csv::read_csv_file(dir.file("out/data.csv")), schema, true);
  CHECK(data.rows() == 40);
  CHECK(data.require_context("stratum").labels.size() == 40);

  // Seed override changes the draw.
  commands::GenerateArgs other = args;
  other.out_dir = dir.file("out2");
  other.seed = 99;
  cmd_generate(other, log);
  const auto meta2 = config::load_json_file(dir.file("out2/meta.json"));
  CHECK(meta2.at("seed").get<std::uint64_t>() == 99);
}

TEST_CASE("generate command writes graph scenarios with edges", "[io]") {
  TempDir dir;
  spit(dir.file("gen.json"), R"({
    "generate": {"scenario": "graph_diffusion", "n": 40, "seed": 11, "noise": 0.05}
  })");
  commands::GenerateArgs args;
  args.config_path = dir.file("gen.json");
  args.out_dir = dir.file("out");
  std::ostringstream log;
  cmd_generate(args, log);

  const auto meta = config::load_json_file(dir.file("out/meta.json"));
  CHECK(meta.at("files").at("edges").get<std::string>() == "edges.csv");
  const graphs::Graph g = csv::graph_from_csv(csv::read_csv_file(dir.file("out/edges.csv")));
  CHECK(g.ids().size() == 40);
  const csv::DatasetSchema schema = config::parse_schema(meta.at("schema"), "meta.schema");
  const Dataset data =
      csv::dataset_from_csv(csv::read_csv_file(dir.file("out/data.csv")), schema, true);
  // Node labels in the table resolve in the emitted graph.
  for (const auto& label : data.require_context("node").labels)
    CHECK_NOTHROW(g.require_index(label));
}

TEST_CASE("fit and predict commands round trip through files", "[io]") {
  TempDir dir;
  spit(dir.file("gen.json"), R"({
    "generate": {"scenario": "piecewise_context", "n": 60, "seed": 4,
                  "sigma": 0.02, "strata": 3}
  })");
  commands::GenerateArgs gen;
  gen.config_path = dir.file("gen.json");
  gen.out_dir = dir.file("bundle");
  std::ostringstream log;
  cmd_generate(gen, log);

  spit(dir.file("fit.json"), R"({
    "data": {
      "train_csv": ")" + dir.file("bundle/data.csv") + R"(",
      "schema": {"z": ["z0"], "label_context": ["stratum"], "response": "y",
                  "row_id": "row_id", "time": "time"}
    },
    "model": {
      "degree": 1, "kernel": "tricube",
      "bandwidth": {"mode": "adaptive", "neighbors": 12},
      "factors": [{"kind": "indicator", "channel": "stratum"}]
    }
  })");
  commands::FitArgs fit;
  fit.config_path = dir.file("fit.json");
  fit.model_out = dir.file("model.json");
  CHECK(commands::guard([&] { cmd_fit(fit, log); }, log) == 0);

  commands::PredictArgs pred;
  pred.model_path = dir.file("model.json");
  pred.data_csv = dir.file("bundle/data.csv");
  pred.out_csv = dir.file("pred.csv");
  CHECK(commands::guard([&] { cmd_predict(pred, log); }, log) == 0);

  const csv::CsvTable out = csv::read_csv_file(dir.file("pred.csv"));
  REQUIRE(out.header ==
          std::vector<std::string>{"row_id", "y_true", "y_pred", "abs_error"});
  REQUIRE(out.rows.size() == 60);
  double worst = 0.0;
  for (const auto& row : out.rows)
    worst = std::max(worst, csv::parse_double(row[3], "abs_error"));
  // In-sample predictions on well-separated strata with tiny noise.
  CHECK(worst < 0.2);
}

TEST_CASE("experiment command writes deterministic reports", "[io]") {
  TempDir dir;
  spit(dir.file("gen.json"), R"({
    "generate": {"scenario": "sine1d", "n": 90, "seed": 6, "sigma": 0.05}
  })");
  commands::GenerateArgs gen;
  gen.config_path = dir.file("gen.json");
  gen.out_dir = dir.file("bundle");
  std::ostringstream log;
  cmd_generate(gen, log);

  spit(dir.file("exp.json"), R"({
    "data": {
      "train_csv": ")" + dir.file("bundle/data.csv") + R"(",
      "schema": {"z": ["z0"], "response": "y", "row_id": "row_id", "time": "time"}
    },
    "model": {
      "degree": 1, "kernel": "tricube",
      "bandwidth": {"mode": "adaptive", "neighbors": 15}
    },
    "evaluation": {
      "split": {"kind": "repeated_holdout", "repetitions": 2, "test_fraction": 0.25, "seed": 3},
      "inner_split": {"kind": "kfold", "folds": 3, "seed": 1},
      "grid": {"degree": [0, 1]}
    }
  })");
  commands::ExperimentArgs exp;
  exp.config_path = dir.file("exp.json");
  exp.report_out = dir.file("report.json");
  exp.predictions_out = dir.file("pred.csv");
  CHECK(commands::guard([&] { cmd_experiment(exp, log); }, log) == 0);
  const std::string first = slurp(dir.file("report.json"));

  exp.report_out = dir.file("report2.json");
  CHECK(commands::guard([&] { cmd_experiment(exp, log); }, log) == 0);
  CHECK(first == slurp(dir.file("report2.json")));

  const auto report = config::load_json_file(dir.file("report.json"));
  CHECK(report.at("format").get<std::string>() == "gclpr-experiment");
  CHECK(report.at("splits").size() == 2);
  CHECK(report.at("summary").at("mean_rmse").get<double>() < 0.2);
  const csv::CsvTable pred = csv::read_csv_file(dir.file("pred.csv"));
  CHECK(pred.header ==
        std::vector<std::string>{"row_id", "y_true", "y_pred", "abs_error"});

  // A seed override rewires the splits deterministically.
  commands::ExperimentArgs seeded = exp;
  seeded.seed = 77;
  seeded.report_out = dir.file("report3.json");
  CHECK(commands::guard([&] { cmd_experiment(seeded, log); }, log) == 0);
  const auto report3 = config::load_json_file(dir.file("report3.json"));
  CHECK(report3.at("outer_split").at("seed").get<std::uint64_t>() == 77);
}

TEST_CASE("commands map failures onto the exit code contract", "[io]") {
  TempDir dir;
  std::ostringstream log;
  commands::FitArgs fit;
  fit.config_path = dir.file("missing.json");
  fit.model_out = dir.file("model.json");
  CHECK(commands::guard([&] { cmd_fit(fit, log); }, log) == 3);

  spit(dir.file("bad.json"), R"({"mdoel": {}})");
  fit.config_path = dir.file("bad.json");
  CHECK(commands::guard([&] { cmd_fit(fit, log); }, log) == 2);

  spit(dir.file("nomodel.json"), R"({"data": {"train_csv": "x.csv", "schema": {"z": ["z0"]}}})");
  fit.config_path = dir.file("nomodel.json");
  CHECK(commands::guard([&] { cmd_fit(fit, log); }, log) == 2);

  spit(dir.file("nofile.json"), R"({
    "data": {"train_csv": ")" + dir.file("absent.csv") + R"(",
              "schema": {"z": ["z0"], "response": "y"}},
    "model": {"degree": 1}
  })");
  fit.config_path = dir.file("nofile.json");
  CHECK(commands::guard([&] { cmd_fit(fit, log); }, log) == 3);

  CHECK(commands::guard([] { throw std::runtime_error("boom"); }, log) == 4);
  CHECK(commands::guard([] {}, log) == 0);
}

TEST_CASE("theory check command prints a verdict per invariant", "[io]") {
  std::ostringstream out;
  const bool ok = commands::cmd_theory_check(out);
  CHECK(ok);
  const std::string text = out.str();
  std::size_t pass_lines = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    REQUIRE(line.substr(0, 7) == "[PASS] ");
    ++pass_lines;
  }
  CHECK(pass_lines == 6);
}
