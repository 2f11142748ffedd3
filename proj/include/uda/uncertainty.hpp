#pragma once

#include <span>
#include <vector>

#include "uda/model_bundle.hpp"
#include "uda/tensor.hpp"

namespace uda::unc {

// Monte Carlo dropout summary for one batch: T stochastic passes, the
// temperature-scaled average prediction, and the two per-sample uncertainty
// summaries (entropy of the averaged prediction; per-class variance of the
// raw logits across passes, reduced by class mean).
struct MCPrediction {
  int T = 0;
  int B = 0;
  int C = 0;
  double tau = 1.0;
  std::vector<double> pass_logits;   // T*B*C, raw classifier outputs
  std::vector<double> mean_probs;    // B*C, rows sum to 1
  std::vector<double> entropy_u;     // B, nats, in [0, ln C]
  std::vector<double> entropy_norm;  // B, entropy_u / ln C, in [0, 1]
  std::vector<double> class_var;     // B*C, population variance per class
  std::vector<double> variance_u;    // B, class-mean of class_var
};

// Same statistics plus the graph tensors behind them, so losses built on the
// uncertainties can backpropagate into extractor and classifier. Built under
// NoGradGuard the tensors are plain constants.
struct McGraph {
  MCPrediction stats;
  nn::Tensor mean_probs;    // [B x C]
  nn::Tensor entropy_norm;  // [B]
  nn::Tensor class_var;     // [B x C]
  nn::Tensor variance;      // [B]
};

// Entropy of one probability row, -sum p ln(max(p, 1e-12)). Rejects rows
// whose sum deviates from 1 by more than 1e-6.
double entropy_of(std::span<const double> row);

// Population (divide-by-T) variance per class across T raw logit rows for a
// single sample, averaged over the C classes.
double variance_of(std::span<const double> pass_logits, int T, int C);

// Runs pass_index = 0..T-1 in McEval mode and assembles the statistics.
// `detach_classifier` snapshots the classifier weights so losses built on
// the result train the extractor only.
McGraph mc_forward(const nn::ModelBundle& bundle, const nn::Tensor& x, int T,
                   double tau, long step, bool detach_classifier = false);

// Evaluation flavor: NoGradGuard around mc_forward, statistics only.
MCPrediction mc_predict(const nn::ModelBundle& bundle, const nn::Tensor& x,
                        int T, double tau, long step);

// Re-derives averaged probabilities and entropies from the stored pass
// logits at a different temperature (accuracy is read at tau=1, uncertainty
// at the configured tau).
struct TemperedStats {
  std::vector<double> mean_probs;    // B*C
  std::vector<double> entropy_u;     // B
  std::vector<double> entropy_norm;  // B
};
TemperedStats tempered_stats(const MCPrediction& pred, double tau);

// Per-sample adversarial-loss coefficients: zero above the threshold,
// exp(-u) renormalized so surviving weights average to 1. The threshold
// lives on the same [0, 1] scale as the normalized uncertainties.
struct AdaptiveWeights {
  std::vector<double> weights;
  double threshold = 0.0;
  int survivor_count = 0;
};
AdaptiveWeights adaptive_weights(const std::vector<double>& uncertainties,
                                 double t_u);

// (v - min) / (max - min); all zeros when the values have no spread. Used to
// put variance uncertainties on the [0, 1] scale the threshold expects.
std::vector<double> min_max_normalize(const std::vector<double>& values);

}  // namespace uda::unc
