#include "uda/adaptation.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "uda/errors.hpp"
#include "uda/ops.hpp"

namespace uda::adapt {

using nn::Tensor;

double lambda_schedule(double m, double gamma) {
  if (!(m >= 0.0 && m <= 1.0)) {
    throw std::invalid_argument("lambda_schedule: m must lie in [0, 1]");
  }
  return 2.0 / (1.0 + std::exp(gamma * m)) - 1.0;
}

ScheduleState schedule_at(long step, long total_steps, double gamma,
                          double lambda_u_ratio) {
  if (total_steps < 1) {
    throw std::invalid_argument("schedule_at: total_steps must be >= 1");
  }
  ScheduleState s;
  s.gamma = gamma;
  s.m = static_cast<double>(step) / static_cast<double>(total_steps);
  s.lambda_adv = lambda_schedule(s.m, gamma);
  s.lambda_u = lambda_u_ratio * s.lambda_adv;
  return s;
}

nn::Tensor classification_loss(const nn::ModelBundle& bundle, const Tensor& xs,
                               const std::vector<int>& ys, double tau_c,
                               long step, int pass_index) {
  if (ys.empty()) throw std::invalid_argument("classification_loss: empty batch");
  if (static_cast<int>(ys.size()) != xs.rows()) {
    throw std::invalid_argument("classification_loss: label/row count mismatch");
  }
  if (!(tau_c > 0.0)) {
    throw std::invalid_argument("classification_loss: tau_c must be > 0");
  }
  Tensor features = bundle.extract_features(xs, nn::PassMode::Train, step, pass_index);
  Tensor logits = bundle.classify(features, nn::PassMode::Train, step, pass_index);
  Tensor probs = nn::softmax_temp(logits, tau_c);
  return nn::cross_entropy(probs, ys);
}

nn::Tensor adversarial_loss(const nn::ModelBundle& bundle,
                            const Tensor& source_feats,
                            const Tensor& target_feats,
                            const Tensor& source_cond,
                            const Tensor& target_cond,
                            const std::vector<double>& alpha_s,
                            const std::vector<double>& alpha_t,
                            double lambda_adv, long step, int source_pass,
                            int target_pass) {
  if (static_cast<int>(alpha_s.size()) != source_feats.rows() ||
      static_cast<int>(alpha_t.size()) != target_feats.rows()) {
    throw std::invalid_argument("adversarial_loss: weight/batch size mismatch");
  }
  Tensor d_src = bundle.discriminate(source_feats, source_cond, lambda_adv,
                                     step, source_pass);
  Tensor d_tgt = bundle.discriminate(target_feats, target_cond, lambda_adv,
                                     step, target_pass);
  Tensor src_term = nn::weighted_log_mean(d_src, alpha_s, /*complement=*/false);
  Tensor tgt_term = nn::weighted_log_mean(d_tgt, alpha_t, /*complement=*/true);
  return nn::add(src_term, tgt_term);
}

nn::Tensor uncertainty_discrepancy(const Tensor& source_u,
                                   const Tensor& target_u, int q) {
  if (q != 1 && q != 2) {
    throw std::invalid_argument("uncertainty_discrepancy: q must be 1 or 2");
  }
  Tensor diff = nn::sub(nn::mean_all(source_u), nn::mean_all(target_u));
  return q == 2 ? nn::mul(diff, diff) : nn::abs_val(diff);
}

double uncertainty_discrepancy(const std::vector<double>& source_u,
                               const std::vector<double>& target_u, int q) {
  if (q != 1 && q != 2) {
    throw std::invalid_argument("uncertainty_discrepancy: q must be 1 or 2");
  }
  if (source_u.empty() || target_u.empty()) {
    throw std::invalid_argument("uncertainty_discrepancy: empty domain batch");
  }
  const double ms = std::accumulate(source_u.begin(), source_u.end(), 0.0) /
                    static_cast<double>(source_u.size());
  const double mt = std::accumulate(target_u.begin(), target_u.end(), 0.0) /
                    static_cast<double>(target_u.size());
  const double diff = ms - mt;
  return q == 2 ? diff * diff : std::abs(diff);
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Normalized per-sample uncertainty on the [0,1] scale the threshold t_u
// expects: entropy is already /ln C, variance is min-max scaled per batch.
std::vector<double> thresholdable_u(const unc::MCPrediction& stats, Metric metric) {
  if (metric == Metric::Entropy) return stats.entropy_norm;
  return unc::min_max_normalize(stats.variance_u);
}

// Conditioning columns for D, detached constants built from the MC stats.
Tensor conditioning_for(const unc::MCPrediction& stats, int cond_dim) {
  if (cond_dim == 0) return Tensor();
  if (cond_dim == 1) {
    return Tensor::constant({stats.B, 1}, stats.entropy_norm);
  }
  if (cond_dim == stats.C) {
    return Tensor::constant({stats.B, stats.C}, stats.class_var);
  }
  throw std::invalid_argument(
      "train_step: discriminator expects conditioning dim " +
      std::to_string(cond_dim) + ", which matches neither entropy (1) nor "
      "variance (" + std::to_string(stats.C) + ")");
}

}  // namespace

LossReport train_step(nn::ModelBundle& bundle, nn::SgdOptimizer& optimizer,
                      const data::DomainBatch& batch, const MethodConfig& cfg,
                      long step, long total_steps) {
  if (batch.size < 1) throw std::invalid_argument("train_step: empty batch");
  const int B = batch.size;
  const int d = batch.d;
  const int T = cfg.T;

  const ScheduleState sched =
      schedule_at(step, total_steps, cfg.gamma, cfg.lambda_u_ratio);

  Tensor xs = Tensor::constant({B, d}, batch.xs);
  Tensor xt = Tensor::constant({B, d}, batch.xt);

  LossReport report;
  report.lambda_adv = sched.lambda_adv;
  report.lambda_u = sched.lambda_u;

  // MC uncertainties. Source-only runs need them only as diagnostics, so the
  // graph is skipped there; the stochastic passes (and so the dropout masks
  // seen by every later pass of this step) are identical either way.
  unc::McGraph mc_s, mc_t;
  if (cfg.mode == Mode::SourceOnly) {
    nn::NoGradGuard guard;
    mc_s = unc::mc_forward(bundle, xs, T, cfg.tau, step);
    mc_t = unc::mc_forward(bundle, xt, T, cfg.tau, step);
  } else {
    mc_s = unc::mc_forward(bundle, xs, T, cfg.tau, step,
                           /*detach_classifier=*/cfg.l_u_generator_only);
    mc_t = unc::mc_forward(bundle, xt, T, cfg.tau, step,
                           /*detach_classifier=*/cfg.l_u_generator_only);
  }

  const std::vector<double> u_s = thresholdable_u(mc_s.stats, cfg.metric);
  const std::vector<double> u_t = thresholdable_u(mc_t.stats, cfg.metric);
  report.mean_source_u = mean_of(u_s);
  report.mean_target_u = mean_of(u_t);

  unc::AdaptiveWeights w_s, w_t;
  if (cfg.mode == Mode::UncertaintyFull) {
    w_s = unc::adaptive_weights(u_s, cfg.t_u);
    w_t = unc::adaptive_weights(u_t, cfg.t_u);
  } else {
    w_s.weights.assign(B, 1.0);
    w_t.weights.assign(B, 1.0);
    w_s.survivor_count = w_t.survivor_count = B;
    w_s.threshold = w_t.threshold = cfg.t_u;
  }
  report.survivor_frac_s = static_cast<double>(w_s.survivor_count) / B;
  report.survivor_frac_t = static_cast<double>(w_t.survivor_count) / B;

  // Classification loss from its own stochastic pass (index T).
  Tensor l_c = classification_loss(bundle, xs, batch.ys, cfg.tau_c, step, T);
  report.l_c = l_c.item();
  Tensor root = l_c;

  if (cfg.mode != Mode::SourceOnly) {
    report.adversarial_skipped =
        w_s.survivor_count == 0 && w_t.survivor_count == 0;
    if (!report.adversarial_skipped) {
      const int cond_dim =
          bundle.discriminator().spec().in_dim() - bundle.feature_dim();
      Tensor cond_s, cond_t;
      if (cfg.mode == Mode::UncertaintyFull) {
        cond_s = conditioning_for(mc_s.stats, cond_dim);
        cond_t = conditioning_for(mc_t.stats, cond_dim);
      } else if (cond_dim != 0) {
        throw std::invalid_argument(
            "train_step: adversarial_plain needs an unconditioned discriminator");
      }
      // Fresh stochastic passes for the domain game (indices T+1, T+2).
      Tensor f_s = bundle.extract_features(xs, nn::PassMode::Train, step, T + 1);
      Tensor f_t = bundle.extract_features(xt, nn::PassMode::Train, step, T + 2);
      Tensor l_adv = adversarial_loss(bundle, f_s, f_t, cond_s, cond_t,
                                      w_s.weights, w_t.weights,
                                      sched.lambda_adv, step, T + 1, T + 2);
      report.l_adv = l_adv.item();
      root = nn::add(root, nn::scale(l_adv, sched.lambda_adv));
    }
  }

  if (cfg.mode == Mode::UncertaintyFull) {
    Tensor l_u = cfg.metric == Metric::Entropy
                     ? uncertainty_discrepancy(mc_s.entropy_norm,
                                               mc_t.entropy_norm,
                                               cfg.discrepancy_q)
                     : uncertainty_discrepancy(mc_s.variance, mc_t.variance,
                                               cfg.discrepancy_q);
    report.l_u = l_u.item();
    root = nn::add(root, nn::scale(l_u, sched.lambda_u));
  } else {
    // Diagnostic only: same definition, no gradient, coefficient zero.
    report.l_u = cfg.metric == Metric::Entropy
                     ? uncertainty_discrepancy(mc_s.stats.entropy_norm,
                                               mc_t.stats.entropy_norm,
                                               cfg.discrepancy_q)
                     : uncertainty_discrepancy(mc_s.stats.variance_u,
                                               mc_t.stats.variance_u,
                                               cfg.discrepancy_q);
  }

  report.l_final = root.item();

  optimizer.prepare_grads();
  root.backward();
  optimizer.step();
  return report;
}

EvalMetrics evaluate(const nn::ModelBundle& bundle,
                     const data::DomainDataset& ds, int T, double tau_u,
                     EvalMode mode) {
  if (ds.n == 0) throw DataError("evaluate: empty dataset");
  if (ds.d != bundle.extractor().spec().in_dim()) {
    throw DataError("evaluate: dataset dim " + std::to_string(ds.d) +
                    " != extractor input dim " +
                    std::to_string(bundle.extractor().spec().in_dim()));
  }
  const int C = bundle.class_count();
  Tensor x = Tensor::constant({ds.n, ds.d}, ds.features);

  // Eval passes live on the reserved step -1 so they never reuse a training
  // step's masks.
  unc::MCPrediction pred;
  if (mode == EvalMode::Mc) {
    pred = unc::mc_predict(bundle, x, T, 1.0, /*step=*/-1);
  } else {
    nn::NoGradGuard guard;
    Tensor features =
        bundle.extract_features(x, nn::PassMode::Expectation, -1, 0);
    Tensor logits = bundle.classify(features, nn::PassMode::Expectation, -1, 0);
    pred.T = 1;
    pred.B = ds.n;
    pred.C = C;
    pred.tau = 1.0;
    pred.pass_logits.assign(logits.values().begin(), logits.values().end());
    Tensor probs = nn::softmax_temp(logits, 1.0);
    pred.mean_probs.assign(probs.values().begin(), probs.values().end());
  }
  const unc::TemperedStats ustats = unc::tempered_stats(pred, tau_u);

  EvalMetrics metrics;
  metrics.per_class_accuracy.assign(C, -1.0);
  std::vector<int> per_class_total(C, 0);
  std::vector<int> per_class_correct(C, 0);
  int correct = 0;
  for (int i = 0; i < ds.n; ++i) {
    const double* row = &pred.mean_probs[static_cast<std::size_t>(i) * C];
    int arg = 0;
    for (int c = 1; c < C; ++c) {
      if (row[c] > row[arg]) arg = c;
    }
    const int label = ds.labels[i];
    if (label < 0) continue;  // noise sentinel
    ++metrics.n_labeled;
    ++per_class_total[label];
    if (arg == label) {
      ++correct;
      ++per_class_correct[label];
    }
  }
  if (metrics.n_labeled > 0) {
    metrics.accuracy = static_cast<double>(correct) / metrics.n_labeled;
  }
  for (int c = 0; c < C; ++c) {
    if (per_class_total[c] > 0) {
      metrics.per_class_accuracy[c] =
          static_cast<double>(per_class_correct[c]) / per_class_total[c];
    }
  }
  metrics.mean_entropy_u = mean_of(ustats.entropy_norm);
  if (mode == EvalMode::Mc) {
    std::vector<double> var(ds.n);
    std::vector<double> sample(static_cast<std::size_t>(pred.T) * C);
    for (int i = 0; i < ds.n; ++i) {
      for (int t = 0; t < pred.T; ++t) {
        for (int c = 0; c < C; ++c) {
          sample[static_cast<std::size_t>(t) * C + c] =
              pred.pass_logits[(static_cast<std::size_t>(t) * ds.n + i) * C + c];
        }
      }
      var[i] = unc::variance_of(sample, pred.T, C);
    }
    metrics.mean_variance_u = mean_of(var);
  }
  return metrics;
}

}  // namespace uda::adapt
