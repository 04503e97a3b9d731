#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace milcheck {

/// Stafford's "Mix13" finalizer as used by SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/**
 * Counter-based random stream keyed by (root_seed, stream_id).
 *
 * Output i is mix64(key + (i + 1) * golden_gamma), i.e. the SplitMix64
 * sequence started at a key derived from both identifiers. There is no hidden
 * state beyond the counter, so a stream can be recreated anywhere and two
 * streams never share state. Not safe to share mutably between threads; copy
 * it instead.
 *
 * Gaussian draws use the Marsaglia polar method. Each vector request consumes
 * whole pairs; the spare of an odd-length request is discarded so that the
 * counter position after a call depends only on the draws made.
 */
class SeedStream {
 public:
  static constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

  SeedStream(std::uint64_t root_seed, std::uint64_t stream_id) noexcept;

  std::uint64_t root_seed() const noexcept { return root_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  void reset() noexcept { counter_ = 0; }

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() noexcept;

  /// Uniform integer in [lo, hi] inclusive. Throws ArgumentError if lo > hi.
  std::int64_t next_uniform_int(std::int64_t lo, std::int64_t hi);

  bool next_bernoulli(double p) noexcept { return next_unit() < p; }
  bool coin_flip() noexcept { return (next_u64() >> 63) != 0; }

  /// Independent N(mean, variance) coordinates. Throws ArgumentError when
  /// variance <= 0 or dim < 1.
  Eigen::VectorXd next_gaussian_vector(double mean, double variance, int dim);

 private:
  std::uint64_t root_seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline SeedStream derive_stream(std::uint64_t root_seed,
                                std::uint64_t stream_id) noexcept {
  return SeedStream(root_seed, stream_id);
}

}  // namespace milcheck
