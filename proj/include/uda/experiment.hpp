#pragma once

#include <iosfwd>
#include <string>

#include "uda/adaptation.hpp"
#include "uda/config.hpp"
#include "uda/model_bundle.hpp"

namespace uda::cli {

struct BuiltData {
  data::DomainDataset source;
  data::DomainDataset target;
};

// Generates (or loads) both domains, applies the target shift and the
// source-fitted standardization. Pure function of the config.
BuiltData build_datasets(const ExperimentConfig& config);

// Fresh bundle whose architecture follows the config and the data: extractor
// d_in -> extractor_dims, classifier feature -> classifier_dims -> C,
// discriminator feature+cond -> discriminator_dims -> 1. The conditioning
// width comes from the method (entropy: 1, variance: C, adversarial_plain: 0).
nn::ModelBundle build_bundle(const ExperimentConfig& config, int input_dim,
                             int class_count);

struct TrainResult {
  adapt::EvalMetrics source_eval;
  adapt::EvalMetrics target_eval;
  std::string metrics_csv;
  std::string checkpoint;
};

// Full training loop. Writes <out_dir>/metrics.csv (one row per epoch) and
// <out_dir>/checkpoint.bin; aborts with NumericError on a non-finite loss.
TrainResult run_train(const ExperimentConfig& config, const std::string& out_dir,
                      std::ostream& log);

struct EvalResult {
  adapt::EvalMetrics source_eval;
  adapt::EvalMetrics target_eval;
};

// Loads a checkpoint, rebuilds the config's datasets and reports metrics for
// both domains; optionally writes them as CSV.
EvalResult run_eval(const ExperimentConfig& config,
                    const std::string& checkpoint_path,
                    const std::string& out_csv, std::ostream& log);

// Expectation-pass features plus an MC uncertainty column for every sample
// of both domains: f0..f{k-1},label,domain,uncertainty.
void export_features(const ExperimentConfig& config,
                     const std::string& checkpoint_path,
                     const std::string& out_path);

// Materializes the generated domains as CSV files for inspection.
void make_synthetic(const ExperimentConfig& config, const std::string& out_dir);

// CSV value used for the uncertainty columns: the method's selected metric
// on its thresholdable scale (normalized entropy, or raw variance mean).
double selected_mean_u(const adapt::EvalMetrics& m, adapt::Metric metric);

}  // namespace uda::cli
