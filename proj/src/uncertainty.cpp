#include "uda/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uda/ops.hpp"

namespace uda::unc {

using nn::Tensor;

double entropy_of(std::span<const double> row) {
  double sum = 0.0;
  for (double p : row) sum += p;
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument(
        "entropy_of: row sums to " + std::to_string(sum) +
        ", not a probability distribution");
  }
  double h = 0.0;
  for (double p : row) h -= p * std::log(std::max(p, nn::kLogFloor));
  return h;
}

double variance_of(std::span<const double> pass_logits, int T, int C) {
  if (T < 1 || C < 1) {
    throw std::invalid_argument("variance_of: T and C must be >= 1");
  }
  if (pass_logits.size() != static_cast<std::size_t>(T) * C) {
    throw std::invalid_argument("variance_of: expected T*C logits");
  }
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += pass_logits[t * C + c];
    mean /= T;
    double var = 0.0;
    for (int t = 0; t < T; ++t) {
      const double d = pass_logits[t * C + c] - mean;
      var += d * d;
    }
    total += var / T;
  }
  return total / C;
}

McGraph mc_forward(const nn::ModelBundle& bundle, const Tensor& x, int T,
                   double tau, long step, bool detach_classifier) {
  if (T < 1) throw std::invalid_argument("mc_forward: T must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("mc_forward: tau must be > 0");

  const int B = x.rows();
  const int C = bundle.class_count();

  std::vector<Tensor> pass_logits;
  pass_logits.reserve(T);
  for (int t = 0; t < T; ++t) {
    Tensor features = bundle.extract_features(x, nn::PassMode::McEval, step, t);
    pass_logits.push_back(bundle.classify(features, nn::PassMode::McEval, step,
                                          t, detach_classifier));
  }

  Tensor prob_acc;
  Tensor logit_acc;
  for (const Tensor& logits : pass_logits) {
    Tensor probs = nn::softmax_temp(logits, tau);
    prob_acc = prob_acc.defined() ? nn::add(prob_acc, probs) : probs;
    logit_acc = logit_acc.defined() ? nn::add(logit_acc, logits) : logits;
  }
  McGraph out;
  out.mean_probs = nn::scale(prob_acc, 1.0 / T);
  Tensor entropy_raw = nn::entropy_rows(out.mean_probs);
  out.entropy_norm = nn::scale(entropy_raw, 1.0 / std::log(double(C)));

  Tensor mean_logits = nn::scale(logit_acc, 1.0 / T);
  Tensor var_acc;
  for (const Tensor& logits : pass_logits) {
    Tensor dev = nn::sub(logits, mean_logits);
    Tensor sq = nn::mul(dev, dev);
    var_acc = var_acc.defined() ? nn::add(var_acc, sq) : sq;
  }
  out.class_var = nn::scale(var_acc, 1.0 / T);
  out.variance = nn::row_mean(out.class_var);

  MCPrediction& stats = out.stats;
  stats.T = T;
  stats.B = B;
  stats.C = C;
  stats.tau = tau;
  stats.pass_logits.reserve(static_cast<std::size_t>(T) * B * C);
  for (const Tensor& logits : pass_logits) {
    auto v = logits.values();
    stats.pass_logits.insert(stats.pass_logits.end(), v.begin(), v.end());
  }
  stats.mean_probs.assign(out.mean_probs.values().begin(),
                          out.mean_probs.values().end());
  stats.entropy_u.assign(entropy_raw.values().begin(),
                         entropy_raw.values().end());
  stats.entropy_norm.assign(out.entropy_norm.values().begin(),
                            out.entropy_norm.values().end());
  stats.class_var.assign(out.class_var.values().begin(),
                         out.class_var.values().end());
  stats.variance_u.assign(out.variance.values().begin(),
                          out.variance.values().end());
  return out;
}

MCPrediction mc_predict(const nn::ModelBundle& bundle, const Tensor& x, int T,
                        double tau, long step) {
  nn::NoGradGuard guard;
  return mc_forward(bundle, x, T, tau, step).stats;
}

TemperedStats tempered_stats(const MCPrediction& pred, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("tempered_stats: tau must be > 0");
  }
  const int T = pred.T;
  const int B = pred.B;
  const int C = pred.C;
  TemperedStats out;
  out.mean_probs.assign(static_cast<std::size_t>(B) * C, 0.0);
  std::vector<double> row(C);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      const double* logits = &pred.pass_logits[(static_cast<std::size_t>(t) * B + b) * C];
      double hi = logits[0];
      for (int c = 1; c < C; ++c) hi = std::max(hi, logits[c]);
      double z = 0.0;
      for (int c = 0; c < C; ++c) {
        row[c] = std::exp((logits[c] - hi) / tau);
        z += row[c];
      }
      for (int c = 0; c < C; ++c) {
        out.mean_probs[static_cast<std::size_t>(b) * C + c] += row[c] / z;
      }
    }
  }
  for (double& p : out.mean_probs) p /= T;
  out.entropy_u.resize(B);
  out.entropy_norm.resize(B);
  for (int b = 0; b < B; ++b) {
    std::span<const double> prow(&out.mean_probs[static_cast<std::size_t>(b) * C],
                                 static_cast<std::size_t>(C));
    out.entropy_u[b] = entropy_of(prow);
    out.entropy_norm[b] = out.entropy_u[b] / std::log(double(C));
  }
  return out;
}

AdaptiveWeights adaptive_weights(const std::vector<double>& uncertainties,
                                 double t_u) {
  if (t_u < 0.0 || t_u > 1.0) {
    throw std::invalid_argument("adaptive_weights: threshold must lie in [0, 1]");
  }
  AdaptiveWeights out;
  out.threshold = t_u;
  out.weights.assign(uncertainties.size(), 0.0);
  double surv_sum = 0.0;
  for (double u : uncertainties) {
    if (u <= t_u) {
      ++out.survivor_count;
      surv_sum += std::exp(-u);
    }
  }
  if (out.survivor_count == 0) return out;
  for (std::size_t i = 0; i < uncertainties.size(); ++i) {
    if (uncertainties[i] <= t_u) {
      out.weights[i] = out.survivor_count * std::exp(-uncertainties[i]) / surv_sum;
    }
  }
  return out;
}

std::vector<double> min_max_normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (hi <= lo) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = (values[i] - lo) / (hi - lo);
  }
  return out;
}

}  // namespace uda::unc
