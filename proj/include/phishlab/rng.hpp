// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace phishlab {

// Deterministic RNG with explicit sampling algorithms. std distributions are
// implementation-defined, so uniform/normal draws are hand-rolled here to keep
// results byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 expansion of the seed into the xoshiro256** state
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    // Lemire multiply-shift; residual bias < 2^-64
    const auto wide = static_cast<__uint128_t>(next_u64()) * range;
    return lo + static_cast<int>(wide >> 64);
  }

  size_t index(size_t n) { return static_cast<size_t>(uniform_int(0, static_cast<int>(n) - 1)); }

  // standard normal via Box-Muller
  double normal() {
    const double u1 = 1.0 - uniform();  // (0,1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  char digit() { return static_cast<char>('0' + uniform_int(0, 9)); }

  template <typename T>
  const T& pick(const std::vector<T>& pool) {
    return pool[index(pool.size())];
  }

  // Derive an independent child stream. Distinct tags give decorrelated
  // streams for the same parent seed.
  static uint64_t mix(uint64_t seed, uint64_t tag) {
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    x = splitmix64(x);
    return splitmix64(x);
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static uint64_t splitmix64(uint64_t&& x) {
    uint64_t y = x;
    return splitmix64(y);
  }
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t state_[4];
};

// Stream tags used to derive per-role RNGs inside a seeded run.
namespace rng_tag {
inline constexpr uint64_t model_init = 1;
inline constexpr uint64_t batch = 2;
inline constexpr uint64_t secret = 3;
inline constexpr uint64_t poison = 4;
inline constexpr uint64_t inference = 5;
inline constexpr uint64_t eval = 6;
inline constexpr uint64_t corpus_pre = 7;
inline constexpr uint64_t corpus_fine = 8;
}  // namespace rng_tag

}  // namespace phishlab
