#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace compgen::grad {

/// Counter-based generator. Draw k of a stream is
///   splitmix64_mix(key + (k + 1) * 0x9E3779B97F4A7C15)
/// where key = splitmix64_mix(seed ^ splitmix64_mix(stream)). Only integer
/// arithmetic is involved, so the u64 sequence is identical on every platform.
/// Derived quantities:
///   uniform()  = (u64 >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller on two uniforms (cosine branch), one draw per call
///   index(n)   = Lemire multiply-shift with rejection
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Uniform integer in [lo, hi].
  long long integer(long long lo, long long hi);
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream keyed by (seed, stream id); leaves this stream untouched.
  Rng derive(std::uint64_t stream) const;

  /// Fisher-Yates.
  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace compgen::grad
