#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace treeglass {

// Seedable generator with independent per-replica streams. The stream for
// (seed, replica) is fixed by std::seed_seq, and uniforms are built from the
// raw 64-bit output, so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x7472u, 0x6565u};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  Rng split(std::uint64_t stream) { return Rng(next(), stream); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace treeglass
