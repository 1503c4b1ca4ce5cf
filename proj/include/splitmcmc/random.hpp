// Counter-based splittable random stream.  (seed, stream id, counter) fully
// determines the output; distinct stream ids give statistically independent
// streams.  SplitMix-style: the output at counter n is a bit-mix of
// key + n * gamma with a per-stream odd gamma.

#pragma once

#include <cmath>
#include <cstdint>

#include "splitmcmc/linalg.hpp"

namespace splitmcmc {

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    key_ = mix64(seed ^ 0x2545F4914F6CDD1DULL) ^
           mix64(stream + 0x9E3779B97F4A7C15ULL);
    gamma_ = mix64(stream ^ 0xDA3E39CB94B95BDBULL) | 1ULL;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent stream derived from the same seed.
  RandomStream substream(std::uint64_t offset) const {
    return RandomStream(seed_, stream_ + offset);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * gamma_);
  }

  // Uniform on [0, 1), 53 bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via the Marsaglia polar method with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Vector normal_vector(Index d) {
    Vector out(d);
    for (Index i = 0; i < d; ++i) out[i] = normal();
    return out;
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t gamma_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace splitmcmc
