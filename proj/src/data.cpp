#include "uda/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "uda/errors.hpp"
#include "uda/rng.hpp"

namespace uda::data {

namespace {

// Context tags for the DataGen stream so moons, blobs, shift noise, noise
// clusters and prior resampling never share draws.
constexpr std::uint64_t kMoonsTag = 1;
constexpr std::uint64_t kBlobsTag = 2;
constexpr std::uint64_t kShiftNoiseTag = 3;
constexpr std::uint64_t kNoiseClusterTag = 4;
constexpr std::uint64_t kPriorTag = 5;

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& in, const std::string& path,
                          const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(path + ": truncated while reading " + what);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

DomainDataset DomainDataset::head(int limit) const {
  if (limit <= 0 || limit >= n) return *this;
  DomainDataset out = *this;
  out.n = limit;
  out.features.assign(features.begin(),
                      features.begin() + static_cast<std::size_t>(limit) * d);
  out.labels.assign(labels.begin(), labels.begin() + limit);
  return out;
}

bool ShiftSpec::is_identity() const {
  const bool translated =
      std::any_of(translation.begin(), translation.end(),
                  [](double t) { return t != 0.0; });
  return rotation_deg == 0.0 && !translated && noise_sigma == 0.0 &&
         dropped_classes.empty() && extra_noise_classes == 0 &&
         class_prior.empty();
}

DomainDataset gen_two_moons(int n, double noise_sigma, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_two_moons: n must be >= 2");
  if (noise_sigma < 0) {
    throw std::invalid_argument("gen_two_moons: noise_sigma must be >= 0");
  }
  rng::KeyedRng rng(seed, rng::Stream::DataGen, {kMoonsTag});
  DomainDataset ds;
  ds.d = 2;
  ds.class_count = 2;
  const int n0 = n / 2 + n % 2;
  const int n1 = n / 2;
  ds.n = n;
  ds.features.reserve(static_cast<std::size_t>(n) * 2);
  ds.labels.reserve(n);
  auto emit = [&](double x, double y, int label) {
    ds.features.push_back(x + (noise_sigma > 0 ? rng.normal(0.0, noise_sigma) : 0.0));
    ds.features.push_back(y + (noise_sigma > 0 ? rng.normal(0.0, noise_sigma) : 0.0));
    ds.labels.push_back(label);
  };
  for (int i = 0; i < n0; ++i) {
    const double t = n0 > 1 ? std::numbers::pi * i / (n0 - 1) : 0.0;
    emit(std::cos(t), std::sin(t), 0);
  }
  for (int i = 0; i < n1; ++i) {
    const double t = n1 > 1 ? std::numbers::pi * i / (n1 - 1) : 0.0;
    emit(1.0 - std::cos(t), 0.5 - std::sin(t), 1);
  }
  return ds;
}

DomainDataset gen_blobs(int n, int class_count, int d, double separation,
                        std::uint64_t seed) {
  if (class_count < 2) throw std::invalid_argument("gen_blobs: need C >= 2");
  if (d < 2) throw std::invalid_argument("gen_blobs: need d >= 2");
  if (n < class_count) throw std::invalid_argument("gen_blobs: need n >= C");
  rng::KeyedRng rng(seed, rng::Stream::DataGen, {kBlobsTag});
  DomainDataset ds;
  ds.n = n;
  ds.d = d;
  ds.class_count = class_count;
  ds.features.reserve(static_cast<std::size_t>(n) * d);
  ds.labels.reserve(n);
  for (int c = 0; c < class_count; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / class_count;
    const double cx = separation * std::cos(angle);
    const double cy = separation * std::sin(angle);
    const int count = n / class_count + (c < n % class_count ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      for (int k = 0; k < d; ++k) {
        const double center = k == 0 ? cx : (k == 1 ? cy : 0.0);
        ds.features.push_back(center + rng.normal());
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

DomainDataset apply_shift(const DomainDataset& ds, const ShiftSpec& spec,
                          std::uint64_t seed) {
  if (spec.is_identity()) return ds;
  if (spec.rotation_deg != 0.0 && ds.d != 2) {
    throw DataError("apply_shift: rotation is only defined for 2-D data");
  }
  if (!spec.translation.empty() &&
      spec.translation.size() != static_cast<std::size_t>(ds.d)) {
    throw DataError("apply_shift: translation has " +
                    std::to_string(spec.translation.size()) +
                    " entries, data has dim " + std::to_string(ds.d));
  }
  if (spec.noise_sigma < 0) {
    throw DataError("apply_shift: noise_sigma must be >= 0");
  }
  for (int c : spec.dropped_classes) {
    if (c < 0 || c >= ds.class_count) {
      throw DataError("apply_shift: dropped class " + std::to_string(c) +
                      " outside [0, " + std::to_string(ds.class_count) + ")");
    }
  }
  if (!spec.class_prior.empty()) {
    if (spec.class_prior.size() != static_cast<std::size_t>(ds.class_count)) {
      throw DataError("apply_shift: class_prior needs one entry per class");
    }
    double sum = 0.0;
    for (double p : spec.class_prior) {
      if (p < 0) throw DataError("apply_shift: class_prior entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DataError("apply_shift: class_prior must sum to 1");
    }
  }

  DomainDataset out;
  out.d = ds.d;
  out.class_count = ds.class_count;
  out.domain = ds.domain;

  // Rotate / translate / add noise.
  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  rng::KeyedRng noise_rng(seed, rng::Stream::DataGen, {kShiftNoiseTag});
  std::vector<double> row(ds.d);
  for (int i = 0; i < ds.n; ++i) {
    for (int k = 0; k < ds.d; ++k) row[k] = ds.features[static_cast<std::size_t>(i) * ds.d + k];
    if (spec.rotation_deg != 0.0) {
      const double x = row[0], y = row[1];
      row[0] = ct * x - st * y;
      row[1] = st * x + ct * y;
    }
    if (!spec.translation.empty()) {
      for (int k = 0; k < ds.d; ++k) row[k] += spec.translation[k];
    }
    if (spec.noise_sigma > 0) {
      for (int k = 0; k < ds.d; ++k) row[k] += noise_rng.normal(0.0, spec.noise_sigma);
    }
    out.features.insert(out.features.end(), row.begin(), row.end());
    out.labels.push_back(ds.labels[i]);
  }
  out.n = ds.n;

  // Drop classes.
  if (!spec.dropped_classes.empty()) {
    DomainDataset kept;
    kept.d = out.d;
    kept.class_count = out.class_count;
    kept.domain = out.domain;
    for (int i = 0; i < out.n; ++i) {
      const int label = out.labels[i];
      const bool dropped =
          std::find(spec.dropped_classes.begin(), spec.dropped_classes.end(),
                    label) != spec.dropped_classes.end();
      if (dropped) continue;
      kept.features.insert(
          kept.features.end(),
          out.features.begin() + static_cast<std::size_t>(i) * out.d,
          out.features.begin() + static_cast<std::size_t>(i + 1) * out.d);
      kept.labels.push_back(label);
      ++kept.n;
    }
    if (kept.n == 0) throw DataError("apply_shift: no samples left after class drops");
    out = std::move(kept);
  }

  // Append unlabeled noise clusters (sentinel label -1).
  if (spec.extra_noise_classes > 0) {
    double radius = 0.0;
    for (double v : out.features) radius = std::max(radius, std::abs(v));
    if (radius == 0.0) radius = 1.0;
    const int per_cluster = std::max(1, ds.n / std::max(1, ds.class_count));
    for (int k = 0; k < spec.extra_noise_classes; ++k) {
      rng::KeyedRng cluster_rng(seed, rng::Stream::DataGen,
                                {kNoiseClusterTag, static_cast<std::uint64_t>(k)});
      std::vector<double> center(out.d);
      for (double& c : center) c = cluster_rng.uniform(-radius, radius);
      for (int i = 0; i < per_cluster; ++i) {
        for (int kk = 0; kk < out.d; ++kk) {
          out.features.push_back(center[kk] + cluster_rng.normal(0.0, 0.1 * radius));
        }
        out.labels.push_back(-1);
        ++out.n;
      }
    }
  }

  // Resample labeled rows to the requested class prior; noise rows pass
  // through untouched.
  if (!spec.class_prior.empty()) {
    std::vector<std::vector<int>> by_class(out.class_count);
    std::vector<int> noise_rows;
    for (int i = 0; i < out.n; ++i) {
      if (out.labels[i] >= 0) {
        by_class[out.labels[i]].push_back(i);
      } else {
        noise_rows.push_back(i);
      }
    }
    int labeled = out.n - static_cast<int>(noise_rows.size());
    rng::KeyedRng prior_rng(seed, rng::Stream::DataGen, {kPriorTag});
    DomainDataset resampled;
    resampled.d = out.d;
    resampled.class_count = out.class_count;
    resampled.domain = out.domain;
    for (int c = 0; c < out.class_count; ++c) {
      const int want = static_cast<int>(std::lround(spec.class_prior[c] * labeled));
      if (want == 0) continue;
      if (by_class[c].empty()) {
        throw DataError("apply_shift: class_prior asks for class " +
                        std::to_string(c) + " but no samples remain");
      }
      for (int i = 0; i < want; ++i) {
        const int src = by_class[c][prior_rng.index(by_class[c].size())];
        resampled.features.insert(
            resampled.features.end(),
            out.features.begin() + static_cast<std::size_t>(src) * out.d,
            out.features.begin() + static_cast<std::size_t>(src + 1) * out.d);
        resampled.labels.push_back(c);
        ++resampled.n;
      }
    }
    for (int src : noise_rows) {
      resampled.features.insert(
          resampled.features.end(),
          out.features.begin() + static_cast<std::size_t>(src) * out.d,
          out.features.begin() + static_cast<std::size_t>(src + 1) * out.d);
      resampled.labels.push_back(-1);
      ++resampled.n;
    }
    if (resampled.n == 0) throw DataError("apply_shift: empty result after prior resample");
    out = std::move(resampled);
  }
  return out;
}

DomainDataset load_idx(const std::string& images_path,
                       const std::string& labels_path, int limit) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open IDX image file: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open IDX label file: " + labels_path);

  if (const auto magic = read_be_u32(img, images_path, "magic"); magic != kImageMagic) {
    throw DataError(images_path + ": bad magic (expected 0x00000803)");
  }
  const std::uint32_t n_images = read_be_u32(img, images_path, "count");
  const std::uint32_t rows = read_be_u32(img, images_path, "rows");
  const std::uint32_t cols = read_be_u32(img, images_path, "cols");

  if (const auto magic = read_be_u32(lab, labels_path, "magic"); magic != kLabelMagic) {
    throw DataError(labels_path + ": bad magic (expected 0x00000801)");
  }
  const std::uint32_t n_labels = read_be_u32(lab, labels_path, "count");
  if (n_images != n_labels) {
    throw DataError("IDX image/label count mismatch: " +
                    std::to_string(n_images) + " vs " + std::to_string(n_labels));
  }
  if (rows == 0 || cols == 0 || rows > 28 || cols > 28) {
    throw DataError(images_path + ": unsupported image size " +
                    std::to_string(rows) + "x" + std::to_string(cols) +
                    " (expected at most 28x28)");
  }

  std::uint32_t keep = n_images;
  if (limit > 0 && static_cast<std::uint32_t>(limit) < keep) keep = limit;

  constexpr int kSide = 28;
  const std::uint32_t pad_top = (kSide - rows) / 2;
  const std::uint32_t pad_left = (kSide - cols) / 2;

  DomainDataset ds;
  ds.n = static_cast<int>(keep);
  ds.d = kSide * kSide;
  ds.class_count = 10;
  ds.features.assign(static_cast<std::size_t>(keep) * ds.d, 0.0);
  ds.labels.resize(keep);

  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < keep; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
      throw DataError(images_path + ": truncated at image " + std::to_string(i));
    }
    double* dst = &ds.features[static_cast<std::size_t>(i) * ds.d];
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        dst[(r + pad_top) * kSide + (c + pad_left)] =
            buf[r * cols + c] / 255.0;
      }
    }
    unsigned char label;
    if (!lab.read(reinterpret_cast<char*>(&label), 1)) {
      throw DataError(labels_path + ": truncated at label " + std::to_string(i));
    }
    if (label > 9) {
      throw DataError(labels_path + ": label " + std::to_string(int(label)) +
                      " outside [0, 9]");
    }
    ds.labels[i] = label;
  }
  return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& labels, int rows, int cols) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("write_idx: rows/cols must be positive");
  }
  const std::size_t per_image = static_cast<std::size_t>(rows) * cols;
  if (pixels.size() != labels.size() * per_image) {
    throw std::invalid_argument("write_idx: pixel/label count mismatch");
  }
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open for writing: " + images_path);
  write_be_u32(img, kImageMagic);
  write_be_u32(img, static_cast<std::uint32_t>(labels.size()));
  write_be_u32(img, static_cast<std::uint32_t>(rows));
  write_be_u32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!img) throw DataError("write failure: " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open for writing: " + labels_path);
  write_be_u32(lab, kLabelMagic);
  write_be_u32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!lab) throw DataError("write failure: " + labels_path);
}

Standardizer Standardizer::fit(const DomainDataset& ds) {
  if (ds.n == 0) throw DataError("standardizer: empty dataset");
  Standardizer s;
  s.mean.assign(ds.d, 0.0);
  s.stddev.assign(ds.d, 0.0);
  for (int i = 0; i < ds.n; ++i) {
    for (int k = 0; k < ds.d; ++k) {
      s.mean[k] += ds.features[static_cast<std::size_t>(i) * ds.d + k];
    }
  }
  for (double& m : s.mean) m /= ds.n;
  for (int i = 0; i < ds.n; ++i) {
    for (int k = 0; k < ds.d; ++k) {
      const double dkk = ds.features[static_cast<std::size_t>(i) * ds.d + k] - s.mean[k];
      s.stddev[k] += dkk * dkk;
    }
  }
  for (double& v : s.stddev) v = std::max(std::sqrt(v / ds.n), 1e-8);
  return s;
}

DomainDataset Standardizer::apply(const DomainDataset& ds) const {
  if (static_cast<std::size_t>(ds.d) != mean.size()) {
    throw DataError("standardizer: dimension mismatch");
  }
  DomainDataset out = ds;
  for (int i = 0; i < ds.n; ++i) {
    for (int k = 0; k < ds.d; ++k) {
      auto& v = out.features[static_cast<std::size_t>(i) * ds.d + k];
      v = (v - mean[k]) / stddev[k];
    }
  }
  return out;
}

std::vector<DomainBatch> batch_iter(const DomainDataset& source,
                                    const DomainDataset& target,
                                    int batch_size, std::uint64_t seed,
                                    long epoch) {
  if (batch_size < 1 || batch_size > std::min(source.n, target.n)) {
    throw DataError("batch_iter: batch_size " + std::to_string(batch_size) +
                    " invalid for dataset sizes " + std::to_string(source.n) +
                    "/" + std::to_string(target.n));
  }
  if (source.d != target.d) {
    throw DataError("batch_iter: source and target dims differ");
  }
  const int steps = source.n / batch_size;

  rng::KeyedRng src_rng(seed, rng::Stream::Shuffle,
                        {0, static_cast<std::uint64_t>(epoch), 0});
  std::vector<std::size_t> src_order = src_rng.permutation(source.n);

  // Target recycles with a fresh shuffle; `round` keys each reshuffle.
  std::uint64_t round = 0;
  rng::KeyedRng tgt_rng(seed, rng::Stream::Shuffle,
                        {1, static_cast<std::uint64_t>(epoch), round});
  std::vector<std::size_t> tgt_order = tgt_rng.permutation(target.n);
  std::size_t tgt_pos = 0;

  std::vector<DomainBatch> batches;
  batches.reserve(steps);
  std::size_t src_pos = 0;
  for (int b = 0; b < steps; ++b) {
    DomainBatch batch;
    batch.size = batch_size;
    batch.d = source.d;
    batch.xs.reserve(static_cast<std::size_t>(batch_size) * source.d);
    batch.xt.reserve(static_cast<std::size_t>(batch_size) * source.d);
    for (int i = 0; i < batch_size; ++i) {
      const std::size_t s = src_order[src_pos++];
      batch.xs.insert(batch.xs.end(),
                      source.features.begin() + s * source.d,
                      source.features.begin() + (s + 1) * source.d);
      batch.ys.push_back(source.labels[s]);

      if (tgt_pos == tgt_order.size()) {
        ++round;
        rng::KeyedRng next_rng(seed, rng::Stream::Shuffle,
                               {1, static_cast<std::uint64_t>(epoch), round});
        tgt_order = next_rng.permutation(target.n);
        tgt_pos = 0;
      }
      const std::size_t t = tgt_order[tgt_pos++];
      batch.xt.insert(batch.xt.end(),
                      target.features.begin() + t * target.d,
                      target.features.begin() + (t + 1) * target.d);
      batch.yt.push_back(target.labels[t]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

void write_dataset_csv(const std::string& path, const DomainDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (int k = 0; k < ds.d; ++k) out << 'f' << k << ',';
  out << "label,domain\n";
  out.precision(17);
  const char* tag = ds.domain == DomainTag::Source ? "source" : "target";
  for (int i = 0; i < ds.n; ++i) {
    for (int k = 0; k < ds.d; ++k) {
      out << ds.features[static_cast<std::size_t>(i) * ds.d + k] << ',';
    }
    out << ds.labels[i] << ',' << tag << '\n';
  }
  if (!out) throw DataError("write failure: " + path);
}

}  // namespace uda::data
