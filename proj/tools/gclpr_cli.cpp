// Command line front end for the context-aware local regression library.
//
// Subcommands:
//   generate      draw a synthetic scenario into data.csv / edges.csv / meta.json
//   fit           fit a model from a config file and save the artifact
//   predict       score a query CSV with a saved model artifact
//   experiment    nested split evaluation with an optional hyperparameter grid
//   theory-check  fast self-diagnostics of the core mathematical invariants
//
// Exit codes: 0 success, 2 configuration problems, 3 file or data problems,
// 4 numeric or internal failures.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gclpr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Context-aware local polynomial regression toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // let --threads/--verbose appear after the subcommand

  unsigned threads = 1;
  bool verbose = false;
  app.add_option("--threads", threads, "Worker threads for fitting and search")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "Print progress details to stderr");

  std::optional<std::uint64_t> seed;

  // generate
  auto* generate = app.add_subcommand("generate", "Draw a synthetic scenario bundle");
  std::string gen_config, gen_out;
  generate->add_option("--config", gen_config, "Config file with a 'generate' section")
      ->required();
  generate->add_option("--out", gen_out, "Output directory for data.csv / meta.json")
      ->required();
  generate->add_option("--seed", seed, "Override the scenario seed");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model and save the artifact");
  std::string fit_config, fit_out;
  fit->add_option("--config", fit_config, "Config file with 'data' and 'model' sections")
      ->required();
  fit->add_option("--out", fit_out, "Path for the model artifact JSON")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Score a query CSV with a saved model");
  std::string pred_model, pred_data, pred_out;
  predict->add_option("--model", pred_model, "Model artifact JSON from 'fit'")->required();
  predict->add_option("--data", pred_data, "Query CSV matching the artifact schema")
      ->required();
  predict->add_option("--out", pred_out, "Output CSV (row_id,y_true,y_pred,abs_error)")
      ->required();

  // experiment
  auto* experiment =
      app.add_subcommand("experiment", "Nested split evaluation with grid search");
  std::string exp_config, exp_report, exp_pred;
  experiment
      ->add_option("--config", exp_config,
                   "Config file with 'data', 'model' and 'evaluation' sections")
      ->required();
  experiment->add_option("--out", exp_report, "Path for the report JSON")->required();
  experiment->add_option("--predictions", exp_pred,
                         "Optional per-row predictions CSV");
  experiment->add_option("--seed", seed, "Override the split seeds");

  // theory-check
  auto* theory = app.add_subcommand("theory-check",
                                    "Verify the core mathematical invariants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; every real usage problem is a config error.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (generate->parsed()) {
    gclpr::commands::GenerateArgs args;
    args.config_path = gen_config;
    args.out_dir = gen_out;
    args.seed = seed;
    args.verbose = verbose;
    return gclpr::commands::guard([&] { cmd_generate(args, std::cerr); }, std::cerr);
  }
  if (fit->parsed()) {
    gclpr::commands::FitArgs args;
    args.config_path = fit_config;
    args.model_out = fit_out;
    args.threads = threads;
    args.verbose = verbose;
    return gclpr::commands::guard([&] { cmd_fit(args, std::cerr); }, std::cerr);
  }
  if (predict->parsed()) {
    gclpr::commands::PredictArgs args;
    args.model_path = pred_model;
    args.data_csv = pred_data;
    args.out_csv = pred_out;
    args.threads = threads;
    args.verbose = verbose;
    return gclpr::commands::guard([&] { cmd_predict(args, std::cerr); }, std::cerr);
  }
  if (experiment->parsed()) {
    gclpr::commands::ExperimentArgs args;
    args.config_path = exp_config;
    args.report_out = exp_report;
    args.predictions_out = exp_pred;
    args.seed = seed;
    args.threads = threads;
    args.verbose = verbose;
    return gclpr::commands::guard([&] { cmd_experiment(args, std::cerr); }, std::cerr);
  }
  if (theory->parsed()) {
    return gclpr::commands::guard(
        [&] {
          if (!gclpr::commands::cmd_theory_check(std::cout))
            throw gclpr::Error("theory-check: at least one invariant failed");
        },
        std::cerr);
  }
  return 2;
}
