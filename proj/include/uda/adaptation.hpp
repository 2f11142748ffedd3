#pragma once

#include <vector>

#include "uda/data.hpp"
#include "uda/model_bundle.hpp"
#include "uda/optimizer.hpp"
#include "uda/uncertainty.hpp"

namespace uda::adapt {

enum class Mode { SourceOnly, AdversarialPlain, UncertaintyFull };
enum class Metric { Entropy, Variance };

// Everything the training step needs besides the models: the method mode and
// the uncertainty hyperparameters. Defaults are the working configuration
// (T=12 passes at tau=1.5, source loss at tau_c=1.8, threshold 0.2, schedule
// gamma=-10 with lambda_u = 0.25*lambda_adv, squared discrepancy).
struct MethodConfig {
  Mode mode = Mode::UncertaintyFull;
  Metric metric = Metric::Entropy;
  int T = 12;
  double tau = 1.5;
  double tau_c = 1.8;
  double t_u = 0.2;
  double gamma = -10.0;
  double lambda_u_ratio = 0.25;
  int discrepancy_q = 2;
  bool l_u_generator_only = false;
};

// lambda_adv = 2/(1+exp(gamma*m)) - 1, the usual warm-up ramp: 0 at m=0,
// approaching 1 as m->1 for negative gamma. Throws on m outside [0,1].
double lambda_schedule(double m, double gamma);

struct ScheduleState {
  double gamma = -10.0;
  double m = 0.0;
  double lambda_adv = 0.0;
  double lambda_u = 0.0;
};
ScheduleState schedule_at(long step, long total_steps, double gamma,
                          double lambda_u_ratio);

// Per-step record; l_final is the value of the scalar actually sent through
// backward: l_c + lambda_adv*l_adv + lambda_u*l_u (terms a mode does not use
// enter with coefficient zero; a skipped adversarial term is omitted).
struct LossReport {
  double l_c = 0.0;
  double l_adv = 0.0;
  double l_u = 0.0;
  double l_final = 0.0;
  double lambda_adv = 0.0;
  double lambda_u = 0.0;
  double mean_source_u = 0.0;
  double mean_target_u = 0.0;
  double survivor_frac_s = 0.0;
  double survivor_frac_t = 0.0;
  bool adversarial_skipped = false;
};

// Source cross-entropy at temperature tau_c from one stochastic pass.
nn::Tensor classification_loss(const nn::ModelBundle& bundle,
                               const nn::Tensor& xs,
                               const std::vector<int>& ys, double tau_c,
                               long step, int pass_index);

// Weighted domain loss: -(1/n_s) sum_i a_i log D(f_i, u_i) on source plus
// -(1/n_t) sum_j a_j log(1 - D(f_j, u_j)) on target. The reversal coefficient
// realizes the generator's opposing objective. All-zero weights simply yield
// a zero loss with zero gradients.
nn::Tensor adversarial_loss(const nn::ModelBundle& bundle,
                            const nn::Tensor& source_feats,
                            const nn::Tensor& target_feats,
                            const nn::Tensor& source_cond,
                            const nn::Tensor& target_cond,
                            const std::vector<double>& alpha_s,
                            const std::vector<double>& alpha_t,
                            double lambda_adv, long step, int source_pass,
                            int target_pass);

// |mean(source_u) - mean(target_u)|^q on per-batch means.
nn::Tensor uncertainty_discrepancy(const nn::Tensor& source_u,
                                   const nn::Tensor& target_u, int q);
double uncertainty_discrepancy(const std::vector<double>& source_u,
                               const std::vector<double>& target_u, int q);

// One optimizer step: MC uncertainties, adaptive weights, classification +
// adversarial + discrepancy losses assembled per the mode, one backward, one
// SGD step over all three networks.
LossReport train_step(nn::ModelBundle& bundle, nn::SgdOptimizer& optimizer,
                      const data::DomainBatch& batch, const MethodConfig& cfg,
                      long step, long total_steps);

enum class EvalMode { Mc, Expectation };

struct EvalMetrics {
  double accuracy = 0.0;
  double mean_entropy_u = 0.0;   // normalized, tempered at tau_u
  double mean_variance_u = 0.0;  // raw scale
  std::vector<double> per_class_accuracy;  // -1 for classes absent in labels
  int n_labeled = 0;
};

// Predictions are argmax of the MC-averaged distribution at tau=1;
// uncertainty is read at tau_u. Rows labeled -1 are excluded from accuracy
// but contribute to the uncertainty means.
EvalMetrics evaluate(const nn::ModelBundle& bundle,
                     const data::DomainDataset& ds, int T, double tau_u,
                     EvalMode mode);

}  // namespace uda::adapt
