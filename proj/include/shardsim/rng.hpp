// Deterministic randomness.
//
// All stochastic pieces (trace generators, expected-transaction sampling,
// mempool noise) draw from Rng seeded through derive_seed, so a run is a
// pure function of its base seed. mt19937_64 is fully specified by the
// standard, which keeps streams identical across platforms and compilers.
#pragma once

#include <cstdint>
#include <random>

namespace shardsim {

// splitmix64 finalizer; good avalanche, cheap, stable.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from (base, a, b). Used for per-epoch
// and per-account streams so results do not depend on evaluation order or
// thread count.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix64(mix64(mix64(base) ^ a) ^ b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, n). Multiply-shift map; bias is O(n / 2^64), irrelevant
  // here, and the result is a deterministic function of the stream.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace shardsim
