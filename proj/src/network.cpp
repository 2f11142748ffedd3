#include "uda/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uda/rng.hpp"

namespace uda::nn {

NetworkSpec NetworkSpec::dense(std::vector<int> dims) {
  NetworkSpec spec;
  spec.layer_dims = std::move(dims);
  for (int l = 0; l + 2 < static_cast<int>(spec.layer_dims.size()); ++l) {
    spec.dropout_after.push_back(l);
  }
  return spec;
}

void NetworkSpec::validate(const std::string& name) const {
  if (layer_dims.empty()) {
    throw std::invalid_argument(name + ": layer_dims must not be empty");
  }
  for (int d : layer_dims) {
    if (d < 1) {
      throw std::invalid_argument(name + ": layer dims must be >= 1, got " +
                                  std::to_string(d));
    }
  }
  const int hidden = std::max(0, layer_count() - 1);
  for (int idx : dropout_after) {
    if (idx < 0 || idx >= hidden) {
      throw std::invalid_argument(name + ": dropout index " +
                                  std::to_string(idx) +
                                  " does not name a hidden layer");
    }
  }
}

std::size_t NetworkSpec::param_count() const {
  std::size_t count = 0;
  for (int l = 0; l + 1 < static_cast<int>(layer_dims.size()); ++l) {
    count += static_cast<std::size_t>(layer_dims[l]) * layer_dims[l + 1] +
             layer_dims[l + 1];
  }
  return count;
}

Network::Network(NetworkSpec spec, double dropout_p, std::uint64_t seed,
                 std::uint64_t stream_tag)
    : spec_(std::move(spec)),
      dropout_p_(dropout_p),
      seed_(seed),
      stream_tag_(stream_tag) {
  spec_.validate("network");
  if (dropout_p_ < 0.0 || dropout_p_ >= 1.0) {
    throw std::invalid_argument("network: dropout_p must lie in [0, 1)");
  }
  for (int l = 0; l < spec_.layer_count(); ++l) {
    const int in = spec_.layer_dims[l];
    const int out = spec_.layer_dims[l + 1];
    rng::KeyedRng rng(seed_, rng::Stream::Init,
                      {stream_tag_, static_cast<std::uint64_t>(l)});
    const double stddev = std::sqrt(2.0 / in);
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& v : w) v = rng.normal(0.0, stddev);
    layers_.push_back(DenseLayer{
        Tensor::param({in, out}, std::move(w)),
        Tensor::param({out}, std::vector<double>(out, 0.0)),
    });
  }
}

Tensor Network::forward(const Tensor& x, PassMode mode, long step,
                        int pass_index, bool detach_params) const {
  if (x.cols() != spec_.in_dim()) {
    throw std::invalid_argument("network forward: input has " +
                                std::to_string(x.cols()) +
                                " columns, spec expects " +
                                std::to_string(spec_.in_dim()));
  }
  Tensor h = x;
  for (int l = 0; l < static_cast<int>(layers_.size()); ++l) {
    const DenseLayer& layer = layers_[l];
    if (detach_params) {
      h = dense_forward(h, DenseLayer{layer.weight.detach(),
                                      layer.bias.detach()});
    } else {
      h = dense_forward(h, layer);
    }
    const bool hidden = l + 1 < static_cast<int>(layers_.size());
    if (!hidden) break;
    h = relu(h);
    const bool wants_dropout =
        std::find(spec_.dropout_after.begin(), spec_.dropout_after.end(), l) !=
        spec_.dropout_after.end();
    if (wants_dropout && dropout_p_ > 0.0) {
      DropoutSpec drop;
      drop.rate = dropout_p_;
      drop.seed = seed_;
      drop.stream_id = rng::mix({stream_tag_, static_cast<std::uint64_t>(l)});
      h = dropout(h, drop, mode, step, pass_index);
    }
  }
  return h;
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> params;
  params.reserve(layers_.size() * 2);
  for (const auto& layer : layers_) {
    params.push_back(layer.weight);
    params.push_back(layer.bias);
  }
  return params;
}

}  // namespace uda::nn
