#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace z2eigen {

// Deterministic random source. mt19937_64 output is pinned by the standard;
// the distributions below are written out so streams are reproducible across
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // One of 2^64 named substreams of a master seed, e.g. for train/val/test.
  static Rng substream(std::uint64_t seed, std::uint64_t stream_id) {
    // splitmix64 over (seed, stream_id)
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27; x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return Rng(x);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call, the sibling is kept for the next call.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::mt19937_64& engine() { return engine_; }
  const std::mt19937_64& engine() const { return engine_; }

  bool have_spare() const { return have_spare_; }
  double spare() const { return spare_; }
  void set_spare(bool have, double value) { have_spare_ = have; spare_ = value; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace z2eigen
