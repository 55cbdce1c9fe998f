#pragma once

#include <cstdint>
#include <string_view>

namespace screff {

/// One step of the SplitMix64 sequence; used for seeding and sub-seed derivation.
std::uint64_t splitmix64(std::uint64_t& state);

/// Collapse (seed, label) into a stage seed so distinct pipeline stages
/// (simulation, chain sampling, imputation, replication, ...) draw from
/// unrelated streams while staying reproducible from one top-level seed.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view label);

/// xoshiro256++ generator seeded via SplitMix64 from (seed, key1, key2, key3).
///
/// Distinct key tuples yield decorrelated streams, so workers keyed by
/// (chain) or (draw, subject) can run concurrently and still produce output
/// that is byte-identical regardless of thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t key1 = 0,
                     std::uint64_t key2 = 0, std::uint64_t key3 = 0);

  std::uint64_t next_u64();

  double uniform();      ///< uniform on [0, 1)
  double uniform_pos();  ///< uniform on (0, 1)
  double normal();       ///< standard normal (Box-Muller)
  double exponential();  ///< unit-rate exponential
  int bernoulli(double p);

  /// Gamma(shape, rate) variate via the Marsaglia-Tsang squeeze method;
  /// shapes below one use the boost Gamma(shape+1) * U^(1/shape).
  double gamma(double shape, double rate);

 private:
  std::uint64_t s_[4];
};

}  // namespace screff
