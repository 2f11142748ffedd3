#include "uda/rng.hpp"

#include <cmath>

namespace uda::rng {

namespace {

// splitmix64 step (Steele et al.); good avalanche for cheap key mixing.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8f3a91c27d6e5b01ULL;
  for (std::uint64_t p : parts) {
    h = splitmix64(h ^ p);
  }
  return h;
}

KeyedRng::KeyedRng(std::uint64_t seed, Stream stream,
                   std::initializer_list<std::uint64_t> context)
    : engine_(0) {
  std::uint64_t h = mix({seed, static_cast<std::uint64_t>(stream)});
  for (std::uint64_t c : context) {
    h = splitmix64(h ^ c);
  }
  engine_.seed(h);
}

std::uint64_t KeyedRng::next_u64() { return engine_(); }

double KeyedRng::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
}

double KeyedRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double KeyedRng::normal() {
  // Box-Muller without caching the second variate: one extra draw per call
  // buys a stateless mapping from the engine sequence to outputs.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double KeyedRng::normal(double mean, double stddev) { return mean + stddev * normal(); }

std::size_t KeyedRng::index(std::size_t n) {
  if (n <= 1) return 0;
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::vector<std::size_t> KeyedRng::permutation(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace uda::rng
