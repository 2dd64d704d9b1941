#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace febm {

// splitmix64; used to decorrelate per-chain seeds derived from one run seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t chain_seed(std::uint64_t run_seed, std::uint64_t stream) {
  return splitmix64(run_seed ^ splitmix64(stream + 1));
}

// mt19937_64 engine with pinned uniform/normal transforms. The standard
// distributions are implementation-defined, so drawing through them would tie
// reproducibility to the standard library version; these transforms pin the
// exact bit stream to the engine alone.
class Rng {
 public:
  Rng() : engine_(0x853c49e6748fea9bULL) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_pos() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via one Box-Muller evaluation per call. Each call
  // consumes exactly two engine words, so the stream position is
  // deterministic regardless of call pattern.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace febm
