#pragma once

#include <cstdint>
#include <random>

#include "mala/common.hpp"

namespace mala {

/// SplitMix64 finalizer; used to spread structured seeds over the state space.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for chain `chain` of sweep point `sweep` under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t sweep,
                                    std::uint64_t chain) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (sweep * 0xd1b54a32d192ed03ULL + 1));
  s = splitmix64(s ^ (chain * 0x8cb92ba72f3d8dd7ULL + 2));
  return s;
}

/// Deterministic random stream owned by a single chain.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

  double normal() { return normal_(engine_); }

  void fill_normal(Vector& out) {
    for (Index i = 0; i < out.size(); ++i) out[i] = normal_(engine_);
  }

  Vector normal_vector(Index n) {
    Vector out(n);
    fill_normal(out);
    return out;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mala
