#pragma once

#include <cmath>
#include <cstdint>

namespace spot {

// SplitMix64 (Steele/Lea/Flood). Used to derive independent per-sample and
// per-stream seeds from one master seed. Recurrence, with x the state:
//   x += 0x9E3779B97F4A7C15
//   z = x; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// PCG-XSH-RR 64/32 (O'Neill, pcg32). State recurrence
//   state' = state * 6364136223846793005 + inc        (inc odd)
// with output
//   rot = state >> 59
//   xsh = uint32(((state >> 18) ^ state) >> 27)
//   out = ror32(xsh, rot)
// The standard library engines are deliberately not used anywhere in this
// project: this generator (plus the Box-Muller transform below) pins every
// random stream bit-for-bit across platforms and standard libraries.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(0), inc_((stream << 1) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xsh = std::uint32_t(((old >> 18) ^ old) >> 27);
    const auto rot = std::uint32_t(old >> 59);
    return (xsh >> rot) | (xsh << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in [0,1) with 53 bits of resolution.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased (rejection sampling). n >= 1.
  std::uint32_t next_below(std::uint32_t n) {
    const std::uint32_t threshold = (-n) % n;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (cosine branch only, so one draw
  // consumes exactly two uniforms).
  double next_gaussian() {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

}  // namespace spot
