#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gclpr/config.hpp"
#include "gclpr/csv.hpp"
#include "gclpr/error.hpp"
#include "gclpr/estimator.hpp"
#include "gclpr/experiment.hpp"
#include "gclpr/model_io.hpp"
#include "gclpr/synthetic.hpp"
#include "gclpr/theory.hpp"

namespace gclpr::commands {

/// Exit-code contract: 0 success, 2 configuration problems, 3 file or data
/// problems, 4 numeric or internal failures.
inline int guard(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  }
}

namespace detail {

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

struct LoadedTable {
  Dataset data;
  std::shared_ptr<const graphs::Graph> graph;
};

inline LoadedTable load_training_table(const config::DataConfig& dc, bool require_response) {
  LoadedTable out;
  out.data = csv::dataset_from_csv(csv::read_csv_file(dc.train_csv), dc.schema,
                                   require_response);
  if (!dc.graph_csv.empty())
    out.graph = std::make_shared<const graphs::Graph>(
        csv::graph_from_csv(csv::read_csv_file(dc.graph_csv)));
  return out;
}

}  // namespace detail

struct GenerateArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

/// Writes data.csv (plus edges.csv for graph scenarios) and meta.json, whose
/// schema block plugs straight into a fit/experiment config.
inline void cmd_generate(const GenerateArgs& args, std::ostream& log) {
  const config::RunConfig cfg = config::parse_run_config(config::load_json_file(args.config_path));
  if (!cfg.generate) throw ConfigError("generate: config has no 'generate' section");
  synthetic::ScenarioSpec spec = *cfg.generate;
  if (args.seed) spec.seed = *args.seed;

  const synthetic::GeneratedData gen = synthetic::generate(spec);
  std::filesystem::create_directories(args.out_dir);

  csv::CsvTable table = csv::dataset_to_csv(gen.data);
  table.header.push_back("y_true");
  for (std::size_t i = 0; i < gen.truth.size(); ++i)
    table.rows[i].push_back(csv::format_double(gen.truth[i]));
  const bool has_mask = !gen.outlier_mask.empty();
  if (has_mask) {
    table.header.push_back("outlier");
    for (std::size_t i = 0; i < gen.outlier_mask.size(); ++i)
      table.rows[i].push_back(gen.outlier_mask[i] ? "1" : "0");
  }
  const std::string data_path = (std::filesystem::path(args.out_dir) / "data.csv").string();
  csv::write_csv_file(data_path, table);

  std::string edges_path;
  if (gen.graph) {
    edges_path = (std::filesystem::path(args.out_dir) / "edges.csv").string();
    csv::write_csv_file(edges_path, csv::graph_to_csv(*gen.graph));
  }

  config::json meta;
  meta["format"] = "gclpr-generate";
  meta["version"] = 1;
  meta["scenario"] = synthetic::to_string(spec.kind);
  meta["n"] = gen.data.rows();
  meta["seed"] = spec.seed;
  meta["schema"] = config::schema_to_json(csv::schema_for(gen.data));
  meta["truth_column"] = "y_true";
  if (has_mask) meta["outlier_column"] = "outlier";
  config::json files;
  files["data"] = "data.csv";
  if (!edges_path.empty()) files["edges"] = "edges.csv";
  meta["files"] = std::move(files);
  detail::write_text_file((std::filesystem::path(args.out_dir) / "meta.json").string(),
                          meta.dump(2) + "\n");

  if (args.verbose)
    log << "generated " << gen.data.rows() << " rows of '" << synthetic::to_string(spec.kind)
        << "' into " << args.out_dir << '\n';
}

struct FitArgs {
  std::string config_path;
  std::string model_out;
  unsigned threads = 1;
  bool verbose = false;
};

/// Fits once to validate the whole pipeline, then saves the reproducible
/// model artifact.
inline void cmd_fit(const FitArgs& args, std::ostream& log) {
  const config::RunConfig cfg = config::parse_run_config(config::load_json_file(args.config_path));
  if (!cfg.data) throw ConfigError("fit: config has no 'data' section");
  if (!cfg.model) throw ConfigError("fit: config has no 'model' section");
  const detail::LoadedTable table = detail::load_training_table(*cfg.data, true);

  const auto model = estimator::FittedModel::fit(table.data, *cfg.model, table.graph);
  (void)model;

  model_io::ModelArtifact art;
  art.data = table.data;
  art.hp = *cfg.model;
  if (table.graph) art.graph = *table.graph;
  art.schema = cfg.data->schema;
  model_io::save_model(args.model_out, art);
  if (args.verbose)
    log << "fitted " << table.data.rows() << " rows, dim " << table.data.dim()
        << "; model saved to " << args.model_out << '\n';
}

struct PredictArgs {
  std::string model_path;
  std::string data_csv;
  std::string out_csv;
  unsigned threads = 1;
  bool verbose = false;
};

/// Scores a query table with a saved model. Rows that fail leave y_pred
/// empty; the command fails only if no row can be scored.
inline void cmd_predict(const PredictArgs& args, std::ostream& log) {
  const model_io::ModelArtifact art = model_io::load_model(args.model_path);
  const auto model = model_io::refit(art);

  const Dataset queries =
      csv::dataset_from_csv(csv::read_csv_file(args.data_csv), art.schema, false);
  const auto res = model.predict(queries, args.threads);

  std::vector<experiment::PredictionRow> rows;
  rows.reserve(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    experiment::PredictionRow row;
    row.row_id = queries.row_id(i);
    row.y_true = queries.has_response() ? queries.y[i]
                                        : std::numeric_limits<double>::quiet_NaN();
    row.y_pred = res.predictions[i];
    rows.push_back(std::move(row));
  }
  csv::write_csv_file(args.out_csv, experiment::predictions_to_csv(rows));

  if (res.failures > 0) {
    log << res.failures << " of " << queries.rows() << " rows failed to score\n";
    if (args.verbose)
      for (std::size_t i = 0; i < res.errors.size(); ++i)
        if (!res.errors[i].empty())
          log << "  row " << queries.row_id(i) << ": " << res.errors[i] << '\n';
  }
  if (queries.rows() > 0 && res.failures == queries.rows())
    throw Error("predict: every row failed to score");
  if (args.verbose)
    log << "scored " << (queries.rows() - res.failures) << " rows into " << args.out_csv
        << '\n';
}

struct ExperimentArgs {
  std::string config_path;
  std::string report_out;
  std::string predictions_out;  // empty = skip
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool verbose = false;
};

/// Nested-split evaluation driven entirely by the config file; the optional
/// seed override rewires both split plans deterministically.
inline void cmd_experiment(const ExperimentArgs& args, std::ostream& log) {
  const config::RunConfig cfg = config::parse_run_config(config::load_json_file(args.config_path));
  if (!cfg.data) throw ConfigError("experiment: config has no 'data' section");
  if (!cfg.model) throw ConfigError("experiment: config has no 'model' section");
  if (!cfg.evaluation) throw ConfigError("experiment: config has no 'evaluation' section");
  const detail::LoadedTable table = detail::load_training_table(*cfg.data, true);

  experiment::ExperimentInputs in;
  in.data = table.data;
  in.graph = table.graph;
  in.base_hp = *cfg.model;
  in.outer = cfg.evaluation->outer;
  in.inner = cfg.evaluation->inner;
  in.grid = cfg.evaluation->grid;
  in.threads = args.threads;
  if (args.seed) {
    in.outer.seed = *args.seed;
    in.inner.seed = mix_seed(*args.seed, 1);
  }

  const experiment::ExperimentReport report = experiment::run_experiment(in);
  detail::write_text_file(args.report_out, experiment::report_to_json(report).dump(2) + "\n");
  if (!args.predictions_out.empty())
    csv::write_csv_file(args.predictions_out,
                        experiment::predictions_to_csv(report.predictions));
  if (args.verbose)
    log << "mean rmse " << report.mean_rmse << " over " << report.splits.size()
        << " outer splits; report saved to " << args.report_out << '\n';
}

/// Fast self-contained diagnostics over the mathematical invariants the
/// library is built on. Prints one line per check; returns overall success.
inline bool cmd_theory_check(std::ostream& out) {
  bool all = true;
  const auto line = [&](const char* name, bool ok, const std::string& detail) {
    out << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) out << " (" << detail << ")";
    out << '\n';
    all = all && ok;
  };

  {
    theory::QuadratureSpec spec;
    spec.half_width = 1.0;
    spec.nodes = 201;
    const auto mom = theory::kernel_moments(kernels::SmoothingKernel::tricube, 1, 1, spec);
    const double normalizer = mom.m0(0, 0);
    line("compact kernel mass equals 81/70", std::abs(normalizer - 81.0 / 70.0) < 1e-6,
         "got " + csv::format_double(normalizer));
    const double mu2 = mom.m0(1, 1) / mom.m0(0, 0);
    line("compact kernel normalized second moment equals 35/243",
         std::abs(mu2 - 35.0 / 243.0) < 1e-6, "got " + csv::format_double(mu2));
  }
  {
    theory::QuadratureSpec spec;
    spec.half_width = 8.0;
    spec.nodes = 401;
    const auto mom = theory::kernel_moments(kernels::SmoothingKernel::gaussian, 0, 1, spec);
    const double mass = mom.m0(0, 0);
    line("gaussian kernel mass equals sqrt(2*pi)",
         std::abs(mass - std::sqrt(2.0 * std::numbers::pi)) < 1e-6,
         "got " + csv::format_double(mass));
  }
  {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(mix_seed(321, seed));
      theory::DiscreteJointDistribution dist;
      const std::size_t atoms = 4 + rng.index(4);
      std::vector<double> probs(atoms);
      double total = 0.0;
      for (double& p : probs) {
        p = 0.1 + rng.uniform();
        total += p;
      }
      const std::vector<std::string> labels = {"a", "b", "c"};
      for (std::size_t i = 0; i < atoms; ++i) {
        theory::Atom a;
        a.z = i % 2 == 0 ? 0.0 : 1.0;
        a.context = kernels::ContextValue{labels[rng.index(labels.size())]};
        a.y = rng.normal(0.0, 2.0);
        a.prob = probs[i] / total;
        dist.atoms.push_back(std::move(a));
      }
      dist.atoms[0].z = 0.0;
      const auto factor = kernels::ContextFactorSpec::aitchison_aitken("g", 0.3);
      const kernels::ContextValue star{std::string("a")};
      for (double a : {-1.0, 0.5, 2.0})
        worst = std::max(worst,
                         std::abs(theory::decomposition_residual(dist, factor, star, 0.0, a)));
    }
    line("weighted variance decomposition residual below 1e-12", worst < 1e-12,
         "worst " + csv::format_double(worst));
  }
  {
    theory::BiasScenario sc;
    sc.target = theory::TargetKind::affine;
    sc.query = 0.4;
    const std::vector<double> hs = {0.15};
    const auto res = theory::bias_rate_experiment(sc, 1, hs, 200, 5, 91);
    line("local linear fit reproduces an affine target", res.values[0] < 1e-8,
         "bias " + csv::format_double(res.values[0]));
  }
  {
    theory::VarianceScenario sc;
    const std::vector<std::size_t> ns = {300, 1200};
    const auto res = theory::variance_scaling_experiment(sc, 1, 0.2, ns, 60, 17);
    line("prediction variance scales like 1/n", res.slope > -1.5 && res.slope < -0.5,
         "slope " + csv::format_double(res.slope));
  }
  return all;
}

}  // namespace gclpr::commands
