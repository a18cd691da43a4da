#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace ssf {

// Counter-based 64-bit generator (splitmix64). Output i is a pure function
// of (seed, i), so any run with the same seed reproduces the stream
// bit-for-bit regardless of how draws are interleaved elsewhere.
//
// Constants (Steele, Lea, Flood; the splitmix64 reference mixer):
//   increment 0x9E3779B97F4A7C15, mix multipliers 0xBF58476D1CE4E5B9 and
//   0x94D049BB133111EB, shifts 30/27/31.
inline uint64_t splitmix64_at(uint64_t seed, uint64_t counter) {
  uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a 64-bit hash, used to derive independent sub-streams from names.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// One named sub-stream per (seed, label): the label is hashed and mixed
// into the seed, so draw order between streams never matters.
inline uint64_t derive_stream_seed(uint64_t seed, const std::string& label) {
  return splitmix64_at(seed ^ fnv1a64(label), 0);
}

class CounterRng {
 public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}
  CounterRng(uint64_t seed, const std::string& label)
      : seed_(derive_stream_seed(seed, label)) {}

  uint64_t next_u64() { return splitmix64_at(seed_, counter_++); }

  // Uniform in [0, 1) from the high 53 bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range; modulo bias is negligible for the small
  // ranges used here and keeps the draw a pure function of one output.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_u64() %
                                     static_cast<uint64_t>(hi - lo + 1));
  }

  // Standard normal via Box-Muller (cosine branch). Consumes exactly two
  // uniforms per draw; log argument is kept in (0, 1].
  double gaussian() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  double gaussian(double mean, double std) { return mean + std * gaussian(); }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace ssf
