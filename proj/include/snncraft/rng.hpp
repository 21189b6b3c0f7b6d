#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace snncraft {

// Deterministic random number generation built on splitmix64.
//
// The standard library distributions (and std::shuffle) are
// implementation-defined, which would make checkpoints and reports differ
// across toolchains. Everything random in this project goes through this
// generator so that a run is reproducible from config + seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Mixes key material into a derived stream seed, so independent consumers
// (dropout masks, encoders, noise draws) never share a sequence.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  Rng r(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
  r.next_u64();
  return r.next_u64() ^ b;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

}  // namespace snncraft
