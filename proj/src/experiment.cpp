#include "uda/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "uda/errors.hpp"
#include "uda/rng.hpp"
#include "uda/uncertainty.hpp"

namespace uda::cli {

namespace {

// Sub-seeds so the source draw, the target draw and the shift randomness are
// independent streams under one dataset seed. The source and target base
// draws share a seed deliberately: an identity shift then yields an
// identical pair, which is the documented way to sanity-check the plumbing.
std::uint64_t base_seed(const DatasetConfig& ds) { return rng::mix({ds.seed, 1}); }
std::uint64_t shift_seed(const DatasetConfig& ds) { return rng::mix({ds.seed, 2}); }

data::DomainDataset generate(const DatasetConfig& ds, int n) {
  if (ds.kind == "two_moons") {
    return data::gen_two_moons(n, ds.noise_sigma, base_seed(ds));
  }
  return data::gen_blobs(n, ds.classes, ds.dim, ds.separation, base_seed(ds));
}

void write_eval_csv(const std::string& path, const adapt::EvalMetrics& src,
                    const adapt::EvalMetrics& tgt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "domain,accuracy,mean_entropy_u,mean_variance_u,n_labeled\n";
  out << "source," << src.accuracy << ',' << src.mean_entropy_u << ','
      << src.mean_variance_u << ',' << src.n_labeled << '\n';
  out << "target," << tgt.accuracy << ',' << tgt.mean_entropy_u << ','
      << tgt.mean_variance_u << ',' << tgt.n_labeled << '\n';
  if (!out) throw DataError("write failure: " + path);
}

void print_metrics(std::ostream& log, const char* domain,
                   const adapt::EvalMetrics& m) {
  log << domain << ": accuracy " << m.accuracy << " over " << m.n_labeled
      << " labeled samples, mean entropy u " << m.mean_entropy_u
      << ", mean variance u " << m.mean_variance_u << "\n";
  log << domain << " per-class accuracy:";
  for (std::size_t c = 0; c < m.per_class_accuracy.size(); ++c) {
    log << ' ' << c << '=';
    if (m.per_class_accuracy[c] < 0) {
      log << "n/a";
    } else {
      log << m.per_class_accuracy[c];
    }
  }
  log << "\n";
}

}  // namespace

double selected_mean_u(const adapt::EvalMetrics& m, adapt::Metric metric) {
  return metric == adapt::Metric::Entropy ? m.mean_entropy_u
                                          : m.mean_variance_u;
}

BuiltData build_datasets(const ExperimentConfig& config) {
  const DatasetConfig& ds = config.dataset;
  BuiltData built;
  if (ds.kind == "idx") {
    built.source = data::load_idx(ds.source_images, ds.source_labels, ds.n_source);
    built.target = data::load_idx(ds.target_images, ds.target_labels, ds.n_target);
    built.target = data::apply_shift(built.target, ds.shift, shift_seed(ds));
  } else {
    built.source = generate(ds, ds.n_source);
    built.target = data::apply_shift(generate(ds, ds.n_target), ds.shift,
                                     shift_seed(ds));
  }
  built.source.domain = data::DomainTag::Source;
  built.target.domain = data::DomainTag::Target;

  const bool standardize = ds.standardize == "on" ||
                           (ds.standardize == "auto" && ds.kind != "idx");
  if (standardize) {
    const data::Standardizer stats = data::Standardizer::fit(built.source);
    built.source = stats.apply(built.source);
    built.target = stats.apply(built.target);
  }
  return built;
}

nn::ModelBundle build_bundle(const ExperimentConfig& config, int input_dim,
                             int class_count) {
  std::vector<int> g_dims = {input_dim};
  for (int w : config.model.extractor_dims) g_dims.push_back(w);
  const int feature_dim = g_dims.back();

  std::vector<int> c_dims = {feature_dim};
  for (int w : config.model.classifier_dims) c_dims.push_back(w);
  c_dims.push_back(class_count);

  const int cond_dim =
      config.method.mode == adapt::Mode::AdversarialPlain
          ? 0
          : nn::conditioning_dim(config.method.metric == adapt::Metric::Entropy
                                     ? nn::Conditioning::Entropy
                                     : nn::Conditioning::Variance,
                                 class_count);
  std::vector<int> d_dims = {feature_dim + cond_dim};
  for (int w : config.model.discriminator_dims) d_dims.push_back(w);
  d_dims.push_back(1);

  return nn::ModelBundle(nn::NetworkSpec::dense(g_dims),
                         nn::NetworkSpec::dense(c_dims),
                         nn::NetworkSpec::dense(d_dims),
                         config.model.dropout_p,
                         config.model.discriminator_dropout_p,
                         config.train.seed);
}

TrainResult run_train(const ExperimentConfig& config,
                      const std::string& out_dir, std::ostream& log) {
  BuiltData data = build_datasets(config);
  if (data.source.class_count != data.target.class_count) {
    throw DataError("source and target class counts differ");
  }
  nn::ModelBundle bundle =
      build_bundle(config, data.source.d, data.source.class_count);
  nn::SgdOptimizer optimizer(bundle.parameters(), config.train.lr,
                             config.train.momentum, config.train.weight_decay);

  const int steps_per_epoch = data.source.n / config.train.batch_size;
  if (steps_per_epoch < 1) {
    throw DataError("train.batch_size exceeds the source dataset size");
  }
  const long total_steps =
      static_cast<long>(config.train.epochs) * steps_per_epoch;

  std::filesystem::create_directories(out_dir);
  const std::string csv_path = out_dir + "/metrics.csv";
  const std::string ckpt_path = out_dir + "/checkpoint.bin";
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot open for writing: " + csv_path);
  csv.precision(17);
  csv << "epoch,l_c,l_adv,l_u,lambda_adv,source_mean_u,target_mean_u,"
         "source_acc,target_acc,survivor_frac_s,survivor_frac_t\n";

  const data::DomainDataset source_eval = data.source.head(config.train.eval_limit);
  const data::DomainDataset target_eval = data.target.head(config.train.eval_limit);

  TrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    double sum_lc = 0, sum_ladv = 0, sum_lu = 0, sum_surv_s = 0, sum_surv_t = 0;
    double last_lambda = 0;
    const auto batches = data::batch_iter(data.source, data.target,
                                          config.train.batch_size,
                                          config.train.seed, epoch);
    for (const auto& batch : batches) {
      const adapt::LossReport report = adapt::train_step(
          bundle, optimizer, batch, config.method, step, total_steps);
      if (!std::isfinite(report.l_final)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) +
                           " (epoch " + std::to_string(epoch) + ")");
      }
      sum_lc += report.l_c;
      sum_ladv += report.l_adv;
      sum_lu += report.l_u;
      sum_surv_s += report.survivor_frac_s;
      sum_surv_t += report.survivor_frac_t;
      last_lambda = report.lambda_adv;
      ++step;
    }
    const double nb = static_cast<double>(batches.size());

    const adapt::EvalMetrics src_m = adapt::evaluate(
        bundle, source_eval, config.method.T, config.method.tau,
        adapt::EvalMode::Mc);
    const adapt::EvalMetrics tgt_m = adapt::evaluate(
        bundle, target_eval, config.method.T, config.method.tau,
        adapt::EvalMode::Mc);

    csv << epoch + 1 << ',' << sum_lc / nb << ',' << sum_ladv / nb << ','
        << sum_lu / nb << ',' << last_lambda << ','
        << selected_mean_u(src_m, config.method.metric) << ','
        << selected_mean_u(tgt_m, config.method.metric) << ','
        << src_m.accuracy << ',' << tgt_m.accuracy << ','
        << sum_surv_s / nb << ',' << sum_surv_t / nb << '\n';
    csv.flush();
    log << "epoch " << epoch + 1 << "/" << config.train.epochs
        << "  l_c " << sum_lc / nb << "  l_adv " << sum_ladv / nb
        << "  l_u " << sum_lu / nb << "  src acc " << src_m.accuracy
        << "  tgt acc " << tgt_m.accuracy << "\n";

    if (epoch + 1 == config.train.epochs) {
      result.source_eval = src_m;
      result.target_eval = tgt_m;
    }
  }
  if (!csv) throw DataError("write failure: " + csv_path);

  nn::save_checkpoint(ckpt_path, bundle, static_cast<std::uint64_t>(step));
  result.metrics_csv = csv_path;
  result.checkpoint = ckpt_path;
  return result;
}

EvalResult run_eval(const ExperimentConfig& config,
                    const std::string& checkpoint_path,
                    const std::string& out_csv, std::ostream& log) {
  nn::LoadedCheckpoint loaded = nn::load_checkpoint(checkpoint_path);
  BuiltData data = build_datasets(config);
  const nn::ModelBundle& bundle = loaded.bundle;
  if (data.source.d != bundle.extractor().spec().in_dim()) {
    throw DataError("checkpoint/config mismatch: extractor expects input dim " +
                    std::to_string(bundle.extractor().spec().in_dim()) +
                    ", dataset has dim " + std::to_string(data.source.d));
  }
  if (data.source.class_count != bundle.class_count()) {
    throw DataError("checkpoint/config mismatch: classifier emits " +
                    std::to_string(bundle.class_count()) +
                    " classes, dataset has " +
                    std::to_string(data.source.class_count));
  }
  EvalResult result;
  result.source_eval = adapt::evaluate(
      bundle, data.source.head(config.train.eval_limit), config.method.T,
      config.method.tau, adapt::EvalMode::Mc);
  result.target_eval = adapt::evaluate(
      bundle, data.target.head(config.train.eval_limit), config.method.T,
      config.method.tau, adapt::EvalMode::Mc);
  print_metrics(log, "source", result.source_eval);
  print_metrics(log, "target", result.target_eval);
  if (!out_csv.empty()) write_eval_csv(out_csv, result.source_eval, result.target_eval);
  return result;
}

void export_features(const ExperimentConfig& config,
                     const std::string& checkpoint_path,
                     const std::string& out_path) {
  nn::LoadedCheckpoint loaded = nn::load_checkpoint(checkpoint_path);
  BuiltData data = build_datasets(config);
  const nn::ModelBundle& bundle = loaded.bundle;
  if (data.source.d != bundle.extractor().spec().in_dim()) {
    throw DataError("checkpoint/config mismatch: extractor expects input dim " +
                    std::to_string(bundle.extractor().spec().in_dim()) +
                    ", dataset has dim " + std::to_string(data.source.d));
  }

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot open for writing: " + out_path);
  out.precision(17);
  const int feat_dim = bundle.feature_dim();
  for (int k = 0; k < feat_dim; ++k) out << 'f' << k << ',';
  out << "label,domain,uncertainty\n";

  auto emit = [&](const data::DomainDataset& ds, const char* tag) {
    nn::NoGradGuard guard;
    nn::Tensor x = nn::Tensor::constant({ds.n, ds.d}, ds.features);
    nn::Tensor features =
        bundle.extract_features(x, nn::PassMode::Expectation, -1, 0);
    const unc::MCPrediction pred =
        unc::mc_predict(bundle, x, config.method.T, config.method.tau, -1);
    const std::vector<double> u =
        config.method.metric == adapt::Metric::Entropy
            ? pred.entropy_norm
            : pred.variance_u;
    auto vals = features.values();
    for (int i = 0; i < ds.n; ++i) {
      for (int k = 0; k < feat_dim; ++k) {
        out << vals[static_cast<std::size_t>(i) * feat_dim + k] << ',';
      }
      out << ds.labels[i] << ',' << tag << ',' << u[i] << '\n';
    }
  };
  emit(data.source, "source");
  emit(data.target, "target");
  if (!out) throw DataError("write failure: " + out_path);
}

void make_synthetic(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.dataset.kind == "idx") {
    throw ConfigError("make-synthetic handles generator kinds only (dataset.kind=idx given)");
  }
  // Raw generator outputs: standardization is a training-time transform.
  const DatasetConfig& ds = config.dataset;
  data::DomainDataset source = generate(ds, ds.n_source);
  data::DomainDataset target =
      data::apply_shift(generate(ds, ds.n_target), ds.shift, shift_seed(ds));
  source.domain = data::DomainTag::Source;
  target.domain = data::DomainTag::Target;
  std::filesystem::create_directories(out_dir);
  data::write_dataset_csv(out_dir + "/source.csv", source);
  data::write_dataset_csv(out_dir + "/target.csv", target);
}

}  // namespace uda::cli
