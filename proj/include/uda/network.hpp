#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uda/ops.hpp"
#include "uda/tensor.hpp"

namespace uda::nn {

// A dense stack described by its layer widths. layer_dims = {in, h1, ..., out};
// a single entry means the identity network (no parameters, output == input).
// ReLU on hidden layers, none on the output; dropout_after lists the hidden
// layer indices whose activation gets a dropout site (default: all of them).
struct NetworkSpec {
  std::vector<int> layer_dims;
  std::vector<int> dropout_after;

  // Spec with dropout after every hidden layer.
  static NetworkSpec dense(std::vector<int> dims);

  void validate(const std::string& name) const;
  int in_dim() const { return layer_dims.front(); }
  int out_dim() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(layer_dims.size()) - 1; }
  std::size_t param_count() const;

  bool operator==(const NetworkSpec&) const = default;
};

// Feedforward net with He-initialized weights, zero biases. `stream_tag`
// separates the init draws and dropout masks of different networks living
// under the same root seed.
class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, double dropout_p, std::uint64_t seed,
          std::uint64_t stream_tag);

  // `detach_params` runs the pass against constant snapshots of the weights,
  // so the output depends on the input graph but trains none of this
  // network's parameters.
  Tensor forward(const Tensor& x, PassMode mode, long step, int pass_index,
                 bool detach_params = false) const;

  std::vector<Tensor> parameters() const;
  const NetworkSpec& spec() const { return spec_; }
  double dropout_p() const { return dropout_p_; }
  bool is_identity() const { return layers_.empty(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  NetworkSpec spec_;
  double dropout_p_ = 0.0;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_tag_ = 0;
  std::vector<DenseLayer> layers_;
};

}  // namespace uda::nn
