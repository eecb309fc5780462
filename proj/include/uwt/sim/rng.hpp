#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace uwt {

/// 64-bit FNV-1a over the label bytes.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream key for (seed, label). Every labelled sub-stream of a run is keyed
/// this way, so modules never share draw counters.
constexpr std::uint64_t derive_stream_key(std::uint64_t seed, std::string_view label) {
  return mix64(seed ^ mix64(fnv1a64(label)));
}

/// Uniform in [0,1) from a single hash of (key, counter); used where a draw must
/// be addressable without advancing a stream.
constexpr double hash_uniform(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(mix64(key + 0x9e3779b97f4a7c15ULL * (counter + 1)) >> 11) * 0x1.0p-53;
}

/// Counter-based generator (SplitMix64 sequence) for one labelled stream.
///
/// Satisfies UniformRandomBitGenerator so it can feed <algorithm>, but the
/// numeric helpers below are used everywhere in the simulator because their
/// output does not depend on the standard library implementation.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}
  RngStream(std::uint64_t seed, std::string_view label) : key_(derive_stream_key(seed, label)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * counter_);
  }

  /// Uniform double in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-free multiply-shift; n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one value per call).
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_{0};
  std::uint64_t counter_{0};
};

}  // namespace uwt
