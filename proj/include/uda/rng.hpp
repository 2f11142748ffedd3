#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace uda::rng {

// Every random draw in the project is keyed: a root seed plus a named stream
// and a few context integers (layer, step, pass, epoch, ...) are hashed into
// one 64-bit state. Identical keys always yield identical draws, regardless
// of what was drawn elsewhere, which is what makes MC passes, shuffles and
// mode comparisons reproducible.
enum class Stream : std::uint64_t {
  Init = 0x11,
  Dropout = 0x22,
  Shuffle = 0x33,
  DataGen = 0x44,
  Eval = 0x55,
};

std::uint64_t mix(std::initializer_list<std::uint64_t> parts);

class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t key) : engine_(key) {}
  KeyedRng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> context);

  // Uniform in [0, 1). Explicit bit arithmetic so draws do not depend on the
  // standard library's distribution implementation.
  double uniform();
  double uniform(double lo, double hi);
  double normal();  // standard normal, Box-Muller
  double normal(double mean, double stddev);
  std::uint64_t next_u64();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace uda::rng
