#include "uda/model_bundle.hpp"

#include <cstring>
#include <fstream>

#include "uda/errors.hpp"
#include "uda/ops.hpp"

namespace uda::nn {

namespace {

constexpr std::uint32_t kMagic = 0x31504355;  // "UCP1" little-endian
constexpr std::uint32_t kVersion = 1;

constexpr std::uint64_t kExtractorTag = 1;
constexpr std::uint64_t kClassifierTag = 2;
constexpr std::uint64_t kDiscriminatorTag = 3;

// Explicit little-endian encoding keeps checkpoints portable across hosts.
void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in, const char* what) {
  std::uint64_t bits = get_u64(in, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_spec(std::ostream& out, const NetworkSpec& spec) {
  put_u32(out, static_cast<std::uint32_t>(spec.layer_dims.size()));
  for (int d : spec.layer_dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, static_cast<std::uint32_t>(spec.dropout_after.size()));
  for (int d : spec.dropout_after) put_u32(out, static_cast<std::uint32_t>(d));
}

NetworkSpec get_spec(std::istream& in, const char* what) {
  NetworkSpec spec;
  const std::uint32_t ndims = get_u32(in, what);
  if (ndims == 0 || ndims > 64) {
    throw DataError(std::string("checkpoint: implausible layer count for ") + what);
  }
  for (std::uint32_t i = 0; i < ndims; ++i) {
    spec.layer_dims.push_back(static_cast<int>(get_u32(in, what)));
  }
  const std::uint32_t ndrop = get_u32(in, what);
  if (ndrop > 64) {
    throw DataError(std::string("checkpoint: implausible dropout list for ") + what);
  }
  for (std::uint32_t i = 0; i < ndrop; ++i) {
    spec.dropout_after.push_back(static_cast<int>(get_u32(in, what)));
  }
  return spec;
}

}  // namespace

int conditioning_dim(Conditioning mode, int class_count) {
  switch (mode) {
    case Conditioning::None:
      return 0;
    case Conditioning::Entropy:
      return 1;
    case Conditioning::Variance:
      return class_count;
  }
  return 0;
}

ModelBundle::ModelBundle(NetworkSpec extractor, NetworkSpec classifier,
                         NetworkSpec discriminator, double dropout_p,
                         double discriminator_dropout_p, std::uint64_t seed)
    : seed_(seed) {
  extractor.validate("feature extractor");
  classifier.validate("classifier");
  discriminator.validate("discriminator");
  if (classifier.in_dim() != extractor.out_dim()) {
    throw std::invalid_argument(
        "model bundle: classifier input dim " +
        std::to_string(classifier.in_dim()) + " != feature dim " +
        std::to_string(extractor.out_dim()));
  }
  if (discriminator.in_dim() < extractor.out_dim()) {
    throw std::invalid_argument(
        "model bundle: discriminator input dim " +
        std::to_string(discriminator.in_dim()) +
        " is narrower than the feature dim " +
        std::to_string(extractor.out_dim()));
  }
  if (discriminator.out_dim() != 1) {
    throw std::invalid_argument("model bundle: discriminator must emit 1 logit");
  }
  extractor_ = Network(std::move(extractor), dropout_p, seed, kExtractorTag);
  classifier_ = Network(std::move(classifier), dropout_p, seed, kClassifierTag);
  discriminator_ = Network(std::move(discriminator), discriminator_dropout_p,
                           seed, kDiscriminatorTag);
}

Tensor ModelBundle::extract_features(const Tensor& x, PassMode mode, long step,
                                     int pass_index) const {
  return extractor_.forward(x, mode, step, pass_index);
}

Tensor ModelBundle::classify(const Tensor& features, PassMode mode, long step,
                             int pass_index, bool detach_params) const {
  return classifier_.forward(features, mode, step, pass_index, detach_params);
}

Tensor ModelBundle::discriminate(const Tensor& features,
                                 const Tensor& conditioning, double coeff,
                                 long step, int pass_index) const {
  const int cond_dim = conditioning.defined() ? conditioning.cols() : 0;
  if (conditioning.defined() && conditioning.rows() != features.rows()) {
    throw std::invalid_argument(
        "discriminate: conditioning rows do not match feature rows");
  }
  if (features.cols() + cond_dim != discriminator_.spec().in_dim()) {
    throw std::invalid_argument(
        "discriminate: feature dim " + std::to_string(features.cols()) +
        " + conditioning dim " + std::to_string(cond_dim) +
        " != discriminator input dim " +
        std::to_string(discriminator_.spec().in_dim()));
  }
  Tensor joined = conditioning.defined() ? concat_cols(features, conditioning)
                                         : features;
  Tensor reversed = gradient_reversal(joined, coeff);
  Tensor logit = discriminator_.forward(reversed, PassMode::Train, step,
                                        pass_index);
  return reshape(sigmoid(logit), {features.rows()});
}

std::vector<Tensor> ModelBundle::parameters() const {
  std::vector<Tensor> params = extractor_.parameters();
  for (auto& p : classifier_.parameters()) params.push_back(p);
  for (auto& p : discriminator_.parameters()) params.push_back(p);
  return params;
}

std::size_t ModelBundle::param_count() const {
  return extractor_.spec().param_count() + classifier_.spec().param_count() +
         discriminator_.spec().param_count();
}

void save_checkpoint(const std::string& path, const ModelBundle& bundle,
                     std::uint64_t step_counter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  put_u32(out, kMagic);
  put_u32(out, kVersion);
  put_spec(out, bundle.extractor().spec());
  put_spec(out, bundle.classifier().spec());
  put_spec(out, bundle.discriminator().spec());
  put_f64(out, bundle.extractor().dropout_p());
  put_f64(out, bundle.discriminator().dropout_p());
  put_u64(out, bundle.seed());
  put_u64(out, step_counter);
  for (const Tensor& p : bundle.parameters()) {
    put_u64(out, p.size());
    for (double v : p.values()) put_f64(out, v);
  }
  if (!out) throw DataError("write failure on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  if (get_u32(in, "magic") != kMagic) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  if (const auto v = get_u32(in, "version"); v != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(v));
  }
  NetworkSpec g = get_spec(in, "extractor spec");
  NetworkSpec c = get_spec(in, "classifier spec");
  NetworkSpec d = get_spec(in, "discriminator spec");
  const double dropout_p = get_f64(in, "dropout_p");
  const double d_dropout_p = get_f64(in, "discriminator dropout_p");
  const std::uint64_t seed = get_u64(in, "seed");
  const std::uint64_t step_counter = get_u64(in, "step counter");

  LoadedCheckpoint loaded;
  try {
    loaded.bundle = ModelBundle(std::move(g), std::move(c), std::move(d),
                                dropout_p, d_dropout_p, seed);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint carries an invalid spec: ") +
                    e.what());
  }
  loaded.step_counter = step_counter;

  for (Tensor& p : loaded.bundle.parameters()) {
    const std::uint64_t count = get_u64(in, "tensor length");
    if (count != p.size()) {
      throw DataError("checkpoint tensor length " + std::to_string(count) +
                      " does not match spec size " + std::to_string(p.size()));
    }
    auto dst = p.values_mut();
    for (std::uint64_t i = 0; i < count; ++i) {
      dst[i] = get_f64(in, "tensor payload");
    }
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw DataError("checkpoint has trailing bytes: " + path);
  }
  return loaded;
}

}  // namespace uda::nn
