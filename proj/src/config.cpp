#include "uda/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "uda/errors.hpp"

namespace uda::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

long long to_int(const std::string& key, const std::string& value) {
  std::size_t consumed = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &consumed);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  if (consumed != value.size()) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t consumed = 0;
  double v = 0;
  try {
    v = std::stod(value, &consumed);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  if (consumed != value.size()) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(to_int(key, trim(item))));
  }
  return out;
}

std::vector<double> to_double_list(const std::string& key,
                                   const std::string& value) {
  std::vector<double> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(to_double(key, trim(item)));
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset.kind",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.kind = v; }},
      {"dataset.seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.seed = static_cast<std::uint64_t>(to_int("dataset.seed", v));
       }},
      {"dataset.n_source",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.n_source = static_cast<int>(to_int("dataset.n_source", v));
       }},
      {"dataset.n_target",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.n_target = static_cast<int>(to_int("dataset.n_target", v));
       }},
      {"dataset.noise_sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.noise_sigma = to_double("dataset.noise_sigma", v);
       }},
      {"dataset.classes",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.classes = static_cast<int>(to_int("dataset.classes", v));
       }},
      {"dataset.dim",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.dim = static_cast<int>(to_int("dataset.dim", v));
       }},
      {"dataset.separation",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.separation = to_double("dataset.separation", v);
       }},
      {"dataset.source_images",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.source_images = v; }},
      {"dataset.source_labels",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.source_labels = v; }},
      {"dataset.target_images",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.target_images = v; }},
      {"dataset.target_labels",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.target_labels = v; }},
      {"dataset.standardize",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.standardize = v; }},
      {"shift.rotation_deg",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.shift.rotation_deg = to_double("shift.rotation_deg", v);
       }},
      {"shift.translation",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.shift.translation = to_double_list("shift.translation", v);
       }},
      {"shift.noise_sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.shift.noise_sigma = to_double("shift.noise_sigma", v);
       }},
      {"shift.dropped_classes",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.shift.dropped_classes = to_int_list("shift.dropped_classes", v);
       }},
      {"shift.extra_noise_classes",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.shift.extra_noise_classes =
             static_cast<int>(to_int("shift.extra_noise_classes", v));
       }},
      {"shift.class_prior",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.shift.class_prior = to_double_list("shift.class_prior", v);
       }},
      {"model.extractor_dims",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.extractor_dims = to_int_list("model.extractor_dims", v);
       }},
      {"model.classifier_dims",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.classifier_dims = to_int_list("model.classifier_dims", v);
       }},
      {"model.discriminator_dims",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.discriminator_dims = to_int_list("model.discriminator_dims", v);
       }},
      {"model.dropout_p",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.dropout_p = to_double("model.dropout_p", v);
       }},
      {"model.discriminator_dropout_p",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.discriminator_dropout_p =
             to_double("model.discriminator_dropout_p", v);
       }},
      {"train.epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.epochs = static_cast<int>(to_int("train.epochs", v));
       }},
      {"train.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.batch_size = static_cast<int>(to_int("train.batch_size", v));
       }},
      {"train.lr",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.lr = to_double("train.lr", v);
       }},
      {"train.momentum",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.momentum = to_double("train.momentum", v);
       }},
      {"train.weight_decay",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.weight_decay = to_double("train.weight_decay", v);
       }},
      {"train.seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.seed = static_cast<std::uint64_t>(to_int("train.seed", v));
       }},
      {"train.eval_limit",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.eval_limit = static_cast<int>(to_int("train.eval_limit", v));
       }},
      {"method.mode",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "source_only") c.method.mode = adapt::Mode::SourceOnly;
         else if (v == "adversarial_plain") c.method.mode = adapt::Mode::AdversarialPlain;
         else if (v == "uncertainty_full") c.method.mode = adapt::Mode::UncertaintyFull;
         else throw ConfigError("method.mode: unknown mode '" + v + "'");
       }},
      {"method.uncertainty_metric",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "entropy") c.method.metric = adapt::Metric::Entropy;
         else if (v == "variance") c.method.metric = adapt::Metric::Variance;
         else throw ConfigError("method.uncertainty_metric: unknown metric '" + v + "'");
       }},
      {"method.mc_passes",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.T = static_cast<int>(to_int("method.mc_passes", v));
       }},
      {"method.tau",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.tau = to_double("method.tau", v);
       }},
      {"method.tau_c",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.tau_c = to_double("method.tau_c", v);
       }},
      {"method.t_u",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.t_u = to_double("method.t_u", v);
       }},
      {"method.gamma",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.gamma = to_double("method.gamma", v);
       }},
      {"method.lambda_u_ratio",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.lambda_u_ratio = to_double("method.lambda_u_ratio", v);
       }},
      {"method.discrepancy_q",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.discrepancy_q = static_cast<int>(to_int("method.discrepancy_q", v));
       }},
      {"method.l_u_generator_only",
       [](ExperimentConfig& c, const std::string& v) {
         c.method.l_u_generator_only = to_bool("method.l_u_generator_only", v);
       }},
  };
  return table;
}

void apply_key(ExperimentConfig& config, const std::string& key,
               const std::string& value, const std::string& where) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) {
    throw ConfigError("unknown config key '" + key + "' (" + where + ")");
  }
  it->second(config, value);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.kind != "two_moons" && dataset.kind != "blobs" &&
      dataset.kind != "idx") {
    throw ConfigError("dataset.kind: must be two_moons, blobs or idx");
  }
  if (dataset.n_source < 2) throw ConfigError("dataset.n_source: must be >= 2");
  if (dataset.n_target < 2) throw ConfigError("dataset.n_target: must be >= 2");
  if (dataset.noise_sigma < 0) throw ConfigError("dataset.noise_sigma: must be >= 0");
  if (dataset.kind == "blobs") {
    if (dataset.classes < 2) throw ConfigError("dataset.classes: must be >= 2");
    if (dataset.dim < 2) throw ConfigError("dataset.dim: must be >= 2");
    if (!(dataset.separation > 0)) throw ConfigError("dataset.separation: must be > 0");
  }
  if (dataset.kind == "idx") {
    if (dataset.source_images.empty()) throw ConfigError("dataset.source_images: required for kind=idx");
    if (dataset.source_labels.empty()) throw ConfigError("dataset.source_labels: required for kind=idx");
    if (dataset.target_images.empty()) throw ConfigError("dataset.target_images: required for kind=idx");
    if (dataset.target_labels.empty()) throw ConfigError("dataset.target_labels: required for kind=idx");
  }
  if (dataset.standardize != "auto" && dataset.standardize != "on" &&
      dataset.standardize != "off") {
    throw ConfigError("dataset.standardize: must be auto, on or off");
  }
  if (dataset.shift.noise_sigma < 0) throw ConfigError("shift.noise_sigma: must be >= 0");
  if (dataset.shift.extra_noise_classes < 0) {
    throw ConfigError("shift.extra_noise_classes: must be >= 0");
  }
  for (int c : dataset.shift.dropped_classes) {
    if (c < 0) throw ConfigError("shift.dropped_classes: class ids must be >= 0");
  }
  if (!dataset.shift.class_prior.empty()) {
    double sum = 0;
    for (double p : dataset.shift.class_prior) {
      if (p < 0) throw ConfigError("shift.class_prior: entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("shift.class_prior: entries must sum to 1");
    }
  }
  for (int v : model.extractor_dims) {
    if (v < 1) throw ConfigError("model.extractor_dims: widths must be >= 1");
  }
  for (int v : model.classifier_dims) {
    if (v < 1) throw ConfigError("model.classifier_dims: widths must be >= 1");
  }
  for (int v : model.discriminator_dims) {
    if (v < 1) throw ConfigError("model.discriminator_dims: widths must be >= 1");
  }
  if (model.dropout_p < 0 || model.dropout_p >= 1) {
    throw ConfigError("model.dropout_p: must lie in [0, 1)");
  }
  if (model.discriminator_dropout_p < 0 || model.discriminator_dropout_p >= 1) {
    throw ConfigError("model.discriminator_dropout_p: must lie in [0, 1)");
  }
  if (train.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(train.lr > 0)) throw ConfigError("train.lr: must be > 0");
  if (train.momentum < 0 || train.momentum >= 1) {
    throw ConfigError("train.momentum: must lie in [0, 1)");
  }
  if (train.weight_decay < 0) throw ConfigError("train.weight_decay: must be >= 0");
  if (train.eval_limit < 0) throw ConfigError("train.eval_limit: must be >= 0");
  if (method.T < 1) throw ConfigError("method.mc_passes: must be >= 1");
  if (!(method.tau > 0)) throw ConfigError("method.tau: must be > 0");
  if (!(method.tau_c > 0)) throw ConfigError("method.tau_c: must be > 0");
  if (method.t_u < 0 || method.t_u > 1) {
    throw ConfigError("method.t_u: must lie in [0, 1] (normalized uncertainty scale)");
  }
  if (method.gamma > 0) {
    throw ConfigError("method.gamma: must be <= 0 (schedule ramps up for negative gamma)");
  }
  if (method.lambda_u_ratio < 0) throw ConfigError("method.lambda_u_ratio: must be >= 0");
  if (method.discrepancy_q != 1 && method.discrepancy_q != 2) {
    throw ConfigError("method.discrepancy_q: must be 1 or 2");
  }
}

ExperimentConfig parse_config(const std::string& path) {
  ExperimentConfig config;
  if (path.empty()) {
    config.validate();
    return config;
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    apply_key(config, key, value, path + ":" + std::to_string(line_no));
  }
  config.validate();
  return config;
}

void apply_overrides(ExperimentConfig& config,
                     const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + item + "'");
    }
    const std::string key = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    apply_key(config, key, value, "--set");
    std::cerr << "config override: " << key << " = " << value << "\n";
  }
  config.validate();
}

}  // namespace uda::cli
