#include "uda/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include "uda/rng.hpp"

namespace uda::nn {

namespace {

Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::initializer_list<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn) {
  bool needs_grad = false;
  if (!detail::no_grad_active()) {
    for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = needs_grad;
  if (needs_grad) {
    for (const Tensor& p : parents) node->parents.push_back(p.handle());
    node->backward = std::move(backward_fn);
  }
  return Tensor::from_node(node);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.shape().size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  detail::Node* pa = a.node();
  detail::Node* pb = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](detail::Node& self) {
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += self.grad[i];
      if (pb->requires_grad) pb->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  detail::Node* pa = a.node();
  detail::Node* pb = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](detail::Node& self) {
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += self.grad[i];
      if (pb->requires_grad) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  detail::Node* pa = a.node();
  detail::Node* pb = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](detail::Node& self) {
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += self.grad[i] * pb->values[i];
      if (pb->requires_grad) pb->grad[i] += self.grad[i] * pa->values[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  detail::Node* pa = a.node();
  return make_op(a.shape(), std::move(out), {a}, [pa, factor](detail::Node& self) {
    if (!pa->requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  detail::Node* px = x.node();
  return make_op(x.shape(), std::move(out), {x}, [px](detail::Node& self) {
    if (!px->requires_grad) return;
    // subgradient at 0 taken as 0
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (px->values[i] > 0.0) px->grad[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  detail::Node* px = x.node();
  return make_op(x.shape(), std::move(out), {x}, [px](detail::Node& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) {
      double s = self.values[i];
      px->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor abs_val(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(xv[i]);
  detail::Node* px = x.node();
  return make_op(x.shape(), std::move(out), {x}, [px](detail::Node& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) {
      double v = px->values[i];
      if (v > 0.0)
        px->grad[i] += self.grad[i];
      else if (v < 0.0)
        px->grad[i] -= self.grad[i];
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("reshape: dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (n != x.size()) throw std::invalid_argument("reshape: element count mismatch");
  std::vector<double> out(x.values().begin(), x.values().end());
  detail::Node* px = x.node();
  return make_op(std::move(shape), std::move(out), {x}, [px](detail::Node& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) px->grad[i] += self.grad[i];
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows())
    throw std::invalid_argument("concat_cols: row count mismatch");
  int rows = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(static_cast<std::size_t>(rows) * (ca + cb));
  auto av = a.values(), bv = b.values();
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < ca; ++j) out[r * (ca + cb) + j] = av[r * ca + j];
    for (int j = 0; j < cb; ++j) out[r * (ca + cb) + ca + j] = bv[r * cb + j];
  }
  detail::Node* pa = a.node();
  detail::Node* pb = b.node();
  return make_op({rows, ca + cb}, std::move(out), {a, b},
                 [pa, pb, rows, ca, cb](detail::Node& self) {
                   for (int r = 0; r < rows; ++r) {
                     if (pa->requires_grad)
                       for (int j = 0; j < ca; ++j)
                         pa->grad[r * ca + j] += self.grad[r * (ca + cb) + j];
                     if (pb->requires_grad)
                       for (int j = 0; j < cb; ++j)
                         pb->grad[r * cb + j] += self.grad[r * (ca + cb) + ca + j];
                   }
                 });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2) throw std::invalid_argument("matmul: inner dimensions disagree");
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  detail::Node* pa = a.node();
  detail::Node* pb = b.node();
  return make_op({m, n}, std::move(out), {a, b},
                 [pa, pb, m, k, n](detail::Node& self) {
                   if (pa->requires_grad) {
                     // dA = G * B^T
                     for (int i = 0; i < m; ++i)
                       for (int j = 0; j < n; ++j) {
                         double g = self.grad[i * n + j];
                         if (g == 0.0) continue;
                         for (int p = 0; p < k; ++p)
                           pa->grad[i * k + p] += g * pb->values[p * n + j];
                       }
                   }
                   if (pb->requires_grad) {
                     // dB = A^T * G
                     for (int i = 0; i < m; ++i)
                       for (int p = 0; p < k; ++p) {
                         double aip = pa->values[i * k + p];
                         if (aip == 0.0) continue;
                         for (int j = 0; j < n; ++j)
                           pb->grad[p * n + j] += aip * self.grad[i * n + j];
                       }
                   }
                 });
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "bias_add");
  if (bias.shape().size() != 1 || bias.shape()[0] != x.cols())
    throw std::invalid_argument("bias_add: bias shape mismatch");
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size());
  auto xv = x.values(), bv = bias.values();
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < cols; ++j) out[r * cols + j] = xv[r * cols + j] + bv[j];
  detail::Node* px = x.node();
  detail::Node* pb = bias.node();
  return make_op(x.shape(), std::move(out), {x, bias},
                 [px, pb, rows, cols](detail::Node& self) {
                   for (int r = 0; r < rows; ++r)
                     for (int j = 0; j < cols; ++j) {
                       double g = self.grad[r * cols + j];
                       if (px->requires_grad) px->grad[r * cols + j] += g;
                       if (pb->requires_grad) pb->grad[j] += g;
                     }
                 });
}

Tensor dense_forward(const Tensor& x, const DenseLayer& layer) {
  check_finite(x, "dense_forward");
  if (x.cols() != layer.in_dim())
    throw std::invalid_argument("dense_forward: input width " + std::to_string(x.cols()) +
                                " does not match layer input " +
                                std::to_string(layer.in_dim()));
  return bias_add(matmul(x, layer.weight), layer.bias);
}

Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  detail::Node* px = x.node();
  return make_op({1}, {total}, {x}, [px](detail::Node& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < px->values.size(); ++i) px->grad[i] += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  double inv = 1.0 / static_cast<double>(x.size());
  detail::Node* px = x.node();
  return make_op({1}, {total * inv}, {x}, [px, inv](detail::Node& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < px->values.size(); ++i)
      px->grad[i] += self.grad[0] * inv;
  });
}

Tensor row_mean(const Tensor& x) {
  require_rank2(x, "row_mean");
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows, 0.0);
  auto xv = x.values();
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += xv[r * cols + j];
    out[r] = s / cols;
  }
  detail::Node* px = x.node();
  return make_op({rows}, std::move(out), {x}, [px, rows, cols](detail::Node& self) {
    if (!px->requires_grad) return;
    double inv = 1.0 / cols;
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < cols; ++j) px->grad[r * cols + j] += self.grad[r] * inv;
  });
}

Tensor softmax_temp(const Tensor& logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("softmax_temp: tau must be positive");
  require_rank2(logits, "softmax_temp");
  int rows = logits.rows(), cols = logits.cols();
  std::vector<double> out(logits.size());
  auto zv = logits.values();
  for (int r = 0; r < rows; ++r) {
    double zmax = zv[r * cols];
    for (int j = 1; j < cols; ++j) zmax = std::max(zmax, zv[r * cols + j]);
    double denom = 0.0;
    for (int j = 0; j < cols; ++j) {
      double e = std::exp((zv[r * cols + j] - zmax) / tau);
      out[r * cols + j] = e;
      denom += e;
    }
    for (int j = 0; j < cols; ++j) out[r * cols + j] /= denom;
  }
  detail::Node* pz = logits.node();
  return make_op(logits.shape(), std::move(out), {logits},
                 [pz, rows, cols, tau](detail::Node& self) {
                   if (!pz->requires_grad) return;
                   for (int r = 0; r < rows; ++r) {
                     double dot = 0.0;
                     for (int j = 0; j < cols; ++j)
                       dot += self.grad[r * cols + j] * self.values[r * cols + j];
                     for (int j = 0; j < cols; ++j) {
                       double p = self.values[r * cols + j];
                       pz->grad[r * cols + j] +=
                           p * (self.grad[r * cols + j] - dot) / tau;
                     }
                   }
                 });
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  require_rank2(probs, "cross_entropy");
  int rows = probs.rows(), cols = probs.cols();
  if (static_cast<int>(labels.size()) != rows)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= cols)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range [0, " + std::to_string(cols) + ")");
  }
  auto pv = probs.values();
  double loss = 0.0;
  for (int r = 0; r < rows; ++r)
    loss -= std::log(std::max(pv[r * cols + labels[r]], kLogFloor));
  loss /= rows;
  detail::Node* pp = probs.node();
  return make_op({1}, {loss}, {probs},
                 [pp, rows, cols, labels](detail::Node& self) {
                   if (!pp->requires_grad) return;
                   double g = self.grad[0];
                   for (int r = 0; r < rows; ++r) {
                     double p = pp->values[r * cols + labels[r]];
                     if (p > kLogFloor)
                       pp->grad[r * cols + labels[r]] -= g / (rows * p);
                   }
                 });
}

Tensor entropy_rows(const Tensor& probs) {
  require_rank2(probs, "entropy_rows");
  int rows = probs.rows(), cols = probs.cols();
  std::vector<double> out(rows, 0.0);
  auto pv = probs.values();
  for (int r = 0; r < rows; ++r) {
    double h = 0.0;
    for (int j = 0; j < cols; ++j) {
      double p = pv[r * cols + j];
      h -= p * std::log(std::max(p, kLogFloor));
    }
    out[r] = h;
  }
  detail::Node* pp = probs.node();
  return make_op({rows}, std::move(out), {probs},
                 [pp, rows, cols](detail::Node& self) {
                   if (!pp->requires_grad) return;
                   for (int r = 0; r < rows; ++r) {
                     double g = self.grad[r];
                     for (int j = 0; j < cols; ++j) {
                       double p = pp->values[r * cols + j];
                       double d = std::log(std::max(p, kLogFloor));
                       if (p > kLogFloor) d += 1.0;
                       pp->grad[r * cols + j] -= g * d;
                     }
                   }
                 });
}

Tensor weighted_log_mean(const Tensor& p, const std::vector<double>& weights,
                         bool complement) {
  if (p.shape().size() != 1)
    throw std::invalid_argument("weighted_log_mean: expected a rank-1 tensor");
  int n = p.rows();
  if (static_cast<int>(weights.size()) != n)
    throw std::invalid_argument("weighted_log_mean: weight count mismatch");
  auto pv = p.values();
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double q = complement ? 1.0 - pv[i] : pv[i];
    loss -= weights[i] * std::log(std::max(q, kLogFloor));
  }
  loss /= n;
  detail::Node* pp = p.node();
  return make_op({1}, {loss}, {p},
                 [pp, n, weights, complement](detail::Node& self) {
                   if (!pp->requires_grad) return;
                   double g = self.grad[0];
                   for (int i = 0; i < n; ++i) {
                     double q = complement ? 1.0 - pp->values[i] : pp->values[i];
                     if (q <= kLogFloor) continue;  // clamped region is flat
                     double d = weights[i] / (n * q);
                     pp->grad[i] += complement ? g * d : -g * d;
                   }
                 });
}

Tensor gradient_reversal(const Tensor& x, double coeff) {
  if (coeff < 0.0)
    throw std::invalid_argument("gradient_reversal: coeff must be non-negative");
  std::vector<double> out(x.values().begin(), x.values().end());
  detail::Node* px = x.node();
  return make_op(x.shape(), std::move(out), {x}, [px, coeff](detail::Node& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i)
      px->grad[i] -= coeff * self.grad[i];
  });
}

Tensor dropout(const Tensor& x, const DropoutSpec& spec, PassMode mode, long step,
               int pass_index) {
  if (spec.rate < 0.0 || spec.rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (mode == PassMode::Expectation || spec.rate == 0.0) return x;
  double keep = 1.0 - spec.rate;
  double inv_keep = 1.0 / keep;
  rng::KeyedRng gen(spec.seed, rng::Stream::Dropout,
                    {spec.stream_id, static_cast<std::uint64_t>(step),
                     static_cast<std::uint64_t>(pass_index)});
  std::vector<double> mask(x.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = gen.uniform() >= spec.rate ? inv_keep : 0.0;
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  detail::Node* px = x.node();
  return make_op(x.shape(), std::move(out), {x},
                 [px, mask = std::move(mask)](detail::Node& self) {
                   if (!px->requires_grad) return;
                   for (std::size_t i = 0; i < self.size(); ++i)
                     px->grad[i] += self.grad[i] * mask[i];
                 });
}

}  // namespace uda::nn
