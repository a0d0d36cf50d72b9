#pragma once

#include <cstdint>
#include <limits>

namespace shapedyn {

/// Counter-based SplitMix64: the i-th output of stream s under seed k is
/// mix64(k + golden * (s * 2^32 + i + 1)). Any draw can be recomputed from
/// (seed, stream, counter) alone, so parallel workers that own disjoint
/// counters reproduce a sequential run bit for bit.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Stateless draw at an explicit counter.
  result_type at(std::uint64_t counter) const {
    return mix64(seed_ + kGolden * ((stream_ << 32) + counter + 1));
  }

  result_type operator()() { return at(counter_++); }

  /// Uniform double in [0, 1) with 53 random bits.
  static double to_unit(result_type bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }
  double uniform() { return to_unit((*this)()); }
  double uniform_at(std::uint64_t counter) const { return to_unit(at(counter)); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace shapedyn
