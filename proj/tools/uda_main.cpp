// Command-line surface: train / eval / export-features / make-synthetic.
// Every subcommand reads one config file plus --set key=value overrides.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric abort, 1 other.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uda/config.hpp"
#include "uda/errors.hpp"
#include "uda/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path,
                  "Config file (key = value lines; omit for defaults)");
  cmd->add_option("--set", args.overrides,
                  "Override a config key, e.g. --set train.seed=3")
      ->take_all();
}

uda::cli::ExperimentConfig load(const CommonArgs& args) {
  uda::cli::ExperimentConfig config = uda::cli::parse_config(args.config_path);
  uda::cli::apply_overrides(config, args.overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-matched unsupervised domain adaptation"};
  app.require_subcommand(1);

  CommonArgs train_args;
  std::string train_out = "run";
  CLI::App* train = app.add_subcommand("train", "Train a model and write metrics + checkpoint");
  add_common(train, train_args);
  train->add_option("-o,--out-dir", train_out, "Output directory (metrics.csv, checkpoint.bin)");

  CommonArgs eval_args;
  std::string eval_ckpt, eval_csv;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the config's datasets");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--out-csv", eval_csv, "Optional metrics CSV");

  CommonArgs export_args;
  std::string export_ckpt, export_out;
  CLI::App* exp = app.add_subcommand("export-features", "Dump features + uncertainty per sample as CSV");
  add_common(exp, export_args);
  exp->add_option("--checkpoint", export_ckpt, "Checkpoint file")->required();
  exp->add_option("-o,--out", export_out, "Output CSV path")->required();

  CommonArgs synth_args;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("make-synthetic", "Write the generated source/target datasets as CSV");
  add_common(synth, synth_args);
  synth->add_option("-o,--out-dir", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      const auto config = load(train_args);
      const auto result = uda::cli::run_train(config, train_out, std::cout);
      std::cout << "final source accuracy " << result.source_eval.accuracy
                << ", target accuracy " << result.target_eval.accuracy << "\n";
      std::cout << "wrote " << result.metrics_csv << " and " << result.checkpoint << "\n";
    } else if (eval->parsed()) {
      const auto config = load(eval_args);
      uda::cli::run_eval(config, eval_ckpt, eval_csv, std::cout);
    } else if (exp->parsed()) {
      const auto config = load(export_args);
      uda::cli::export_features(config, export_ckpt, export_out);
      std::cout << "wrote " << export_out << "\n";
    } else if (synth->parsed()) {
      const auto config = load(synth_args);
      uda::cli::make_synthetic(config, synth_out);
      std::cout << "wrote " << synth_out << "/source.csv and " << synth_out << "/target.csv\n";
    }
  } catch (const uda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const uda::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const uda::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
