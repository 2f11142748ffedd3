#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uda/adaptation.hpp"
#include "uda/data.hpp"

namespace uda::cli {

// Flat `section.key = value` text config. Unknown keys are rejected; every
// constraint violation names the offending key. Defaults reproduce the
// working hyperparameters, so an empty file is a valid experiment.
struct DatasetConfig {
  std::string kind = "two_moons";  // two_moons | blobs | idx
  std::uint64_t seed = 7;
  int n_source = 600;
  int n_target = 500;
  double noise_sigma = 0.1;  // generator noise (synthetic kinds)
  int classes = 5;           // blobs
  int dim = 2;               // blobs
  double separation = 3.0;   // blobs
  std::string source_images, source_labels;  // idx
  std::string target_images, target_labels;  // idx
  std::string standardize = "auto";  // auto | on | off
  data::ShiftSpec shift;             // applied to the target domain
};

struct ModelConfig {
  std::vector<int> extractor_dims = {128, 64};  // hidden..feature widths
  std::vector<int> classifier_dims = {};        // extra hidden widths
  std::vector<int> discriminator_dims = {32};   // hidden widths
  double dropout_p = 0.5;
  double discriminator_dropout_p = 0.0;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  int eval_limit = 0;  // 0 = evaluate on every sample
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  adapt::MethodConfig method;

  void validate() const;  // throws ConfigError naming the key
};

// Parses a config file; `path` may be empty for an all-defaults config.
ExperimentConfig parse_config(const std::string& path);

// Applies `key=value` strings (CLI --set) on top, logging each override to
// stderr. Flag wins over file.
void apply_overrides(ExperimentConfig& config,
                     const std::vector<std::string>& overrides);

}  // namespace uda::cli
