#pragma once

#include <cstdint>
#include <limits>

namespace bayescore {

/// Counter-based, splittable 64-bit generator.
///
/// Output n of a stream is a bijective mix of (key, n), so a stream is fully
/// determined by its key and any number of statistically independent
/// streams can be derived from one seed with split(). Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

}  // namespace bayescore
