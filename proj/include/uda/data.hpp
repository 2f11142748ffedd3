#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uda::data {

enum class DomainTag { Source, Target };

// Label -1 is the noise-class sentinel: such rows are fed to the model like
// any other but excluded from accuracy bookkeeping.
struct DomainDataset {
  int n = 0;
  int d = 0;
  int class_count = 0;
  std::vector<double> features;  // n*d row-major
  std::vector<int> labels;       // n entries in [0, class_count) or -1
  DomainTag domain = DomainTag::Source;

  // First `limit` rows (0 = everything); used to cap evaluation cost.
  DomainDataset head(int limit) const;
};

// Target-domain perturbation: rotation (2-D only), translation, additive
// Gaussian noise, class drops, appended unlabeled noise clusters, and a
// class-prior resample — applied in that order.
struct ShiftSpec {
  double rotation_deg = 0.0;
  std::vector<double> translation;  // empty or d entries
  double noise_sigma = 0.0;
  std::vector<int> dropped_classes;
  int extra_noise_classes = 0;
  std::vector<double> class_prior;  // empty, or class_count entries summing to 1

  bool is_identity() const;
};

// Two interleaved arcs, balanced classes, class-0 block first. noise_sigma
// perturbs both coordinates.
DomainDataset gen_two_moons(int n, double noise_sigma, std::uint64_t seed);

// C unit-variance Gaussian clusters with means on a circle of radius
// `separation` embedded in the first two of d dimensions.
DomainDataset gen_blobs(int n, int class_count, int d, double separation,
                        std::uint64_t seed);

DomainDataset apply_shift(const DomainDataset& ds, const ShiftSpec& spec,
                          std::uint64_t seed);

// IDX ingestion (big-endian magic 0x803 images / 0x801 labels). Pixels are
// scaled to [0,1] and images up to 28x28 are zero-padded to a flat 784
// vector. limit > 0 keeps only the first records.
DomainDataset load_idx(const std::string& images_path,
                       const std::string& labels_path, int limit);

// Writes the matching pair of IDX files (features quantized back to bytes as
// round(v*255)); counterpart of load_idx for round-trip checks and fixtures.
void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& labels, int rows, int cols);

// Per-dimension zero-mean/unit-variance transform fitted on one dataset
// (the source) and applied to both domains.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8
  static Standardizer fit(const DomainDataset& ds);
  DomainDataset apply(const DomainDataset& ds) const;
};

struct DomainBatch {
  int size = 0;
  int d = 0;
  std::vector<double> xs, xt;  // size*d each
  std::vector<int> ys, yt;     // yt carried for diagnostics only
};

// One training epoch of paired equal-size batches. Each domain is shuffled
// independently and deterministically per (seed, epoch); the epoch length is
// floor(N_s / batch_size) and the shorter domain recycles with a fresh
// shuffle when exhausted.
std::vector<DomainBatch> batch_iter(const DomainDataset& source,
                                    const DomainDataset& target,
                                    int batch_size, std::uint64_t seed,
                                    long epoch);

// CSV with header f0..f{d-1},label,domain.
void write_dataset_csv(const std::string& path, const DomainDataset& ds);

}  // namespace uda::data
