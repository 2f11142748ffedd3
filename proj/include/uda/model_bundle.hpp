#pragma once

#include <cstdint>
#include <string>

#include "uda/network.hpp"

namespace uda::nn {

// How the discriminator is conditioned on per-sample uncertainty: a single
// normalized-entropy column, the per-class variance vector, or nothing.
enum class Conditioning { None, Entropy, Variance };

int conditioning_dim(Conditioning mode, int class_count);

// The three networks of the adaptation setup: feature extractor G, classifier
// C and domain discriminator D. D's input width is G's output width plus the
// conditioning dimension.
class ModelBundle {
 public:
  ModelBundle() = default;
  ModelBundle(NetworkSpec extractor, NetworkSpec classifier,
              NetworkSpec discriminator, double dropout_p,
              double discriminator_dropout_p, std::uint64_t seed);

  Tensor extract_features(const Tensor& x, PassMode mode, long step,
                          int pass_index) const;
  Tensor classify(const Tensor& features, PassMode mode, long step,
                  int pass_index, bool detach_params = false) const;
  // Concatenates features with the (already detached) conditioning columns,
  // routes through gradient reversal with `coeff`, then D and a sigmoid.
  // Returns [B] source-probabilities in (0, 1). `conditioning` may be an
  // undefined Tensor when D is unconditioned.
  Tensor discriminate(const Tensor& features, const Tensor& conditioning,
                      double coeff, long step, int pass_index) const;

  std::vector<Tensor> parameters() const;
  std::size_t param_count() const;

  Network& extractor() { return extractor_; }
  Network& classifier() { return classifier_; }
  Network& discriminator() { return discriminator_; }
  const Network& extractor() const { return extractor_; }
  const Network& classifier() const { return classifier_; }
  const Network& discriminator() const { return discriminator_; }

  int feature_dim() const { return extractor_.spec().out_dim(); }
  int class_count() const { return classifier_.spec().out_dim(); }
  std::uint64_t seed() const { return seed_; }

 private:
  Network extractor_;
  Network classifier_;
  Network discriminator_;
  std::uint64_t seed_ = 0;
};

// Checkpoint: little-endian binary. Header carries a format tag, the three
// network specs, both dropout rates, the RNG seed and a step counter; the
// parameter payload is each tensor as a length-prefixed float64 array in
// declaration order (per network: weight, bias, weight, bias, ...).
void save_checkpoint(const std::string& path, const ModelBundle& bundle,
                     std::uint64_t step_counter);

struct LoadedCheckpoint {
  ModelBundle bundle;
  std::uint64_t step_counter = 0;
};

// Throws DataError on bad magic/version, truncation, or payload/spec
// disagreement.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace uda::nn
