#pragma once

#include <cstdint>
#include <vector>

#include "uda/tensor.hpp"

namespace uda::nn {

// Clamp floor shared by every log in the project (cross-entropy, entropy,
// domain log-loss).
inline constexpr double kLogFloor = 1e-12;

struct DenseLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
  int in_dim() const { return weight.shape()[0]; }
  int out_dim() const { return weight.shape()[1]; }
};

// Bernoulli masks are a pure function of (seed, stream_id, step, pass_index):
// MC passes, the classification pass and any later replay of a step all see
// exactly the masks assigned to them, independent of call order.
struct DropoutSpec {
  double rate = 0.5;
  std::uint64_t stream_id = 0;
  std::uint64_t seed = 0;
};

// Train and McEval both keep dropout active (MC-dropout evaluation samples
// the posterior); Expectation disables it for single deterministic passes.
enum class PassMode { Train, McEval, Expectation };

// Elementwise / shape ops ----------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor abs_val(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Linear algebra --------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor bias_add(const Tensor& x, const Tensor& bias);
Tensor dense_forward(const Tensor& x, const DenseLayer& layer);

// Reductions ------------------------------------------------------------------
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor row_mean(const Tensor& x);  // [B x C] -> [B]

// Classification --------------------------------------------------------------
Tensor softmax_temp(const Tensor& logits, double tau);
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);
Tensor entropy_rows(const Tensor& probs);  // [B x C] -> [B], natural log

// -(1/B) sum_i w_i log(clamp(p_i)) over a [B] tensor, or log(clamp(1-p_i))
// when `complement` is set. The weighted halves of the domain loss.
Tensor weighted_log_mean(const Tensor& p, const std::vector<double>& weights,
                         bool complement);

// Adversarial plumbing ---------------------------------------------------------
// Identity forward; backward scales the upstream gradient by -coeff.
Tensor gradient_reversal(const Tensor& x, double coeff);

// Inverted dropout: kept units scale by 1/(1-p) so expectation matches the
// mask-free pass. rate==0 returns the input unchanged.
Tensor dropout(const Tensor& x, const DropoutSpec& spec, PassMode mode, long step,
               int pass_index);

}  // namespace uda::nn
