#pragma once

#include <cstdint>
#include <string_view>

namespace crm {

/// Counter-based pseudo-random generator (SplitMix64). The i-th output is a
/// pure function of (stream key, i), so a stream can be replayed or split
/// without carrying mutable engine state around.
///
/// Stream splitting: the key is derived as
///   key = mix(mix(seed) ^ fnv1a64(purpose_tag) ^ mix(stream_index + C))
/// so distinct (seed, tag, index) triples give statistically independent
/// streams. Dataset generation, training and hull-growth trials each use
/// their own tag; parallel trials use the trial number as stream_index.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view purpose_tag,
      std::uint64_t stream_index = 0);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double next_double();

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);

  /// Standard normal via Box-Muller; generates pairs, caches the second.
  double next_gaussian();

  std::uint64_t stream_key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

/// SplitMix64 finalizer; also used for hashing small config records.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over a byte string, used for purpose tags and content hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace crm
