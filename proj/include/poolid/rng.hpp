#ifndef POOLID_RNG_HPP
#define POOLID_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string>

namespace poolid {

// Small deterministic generator (splitmix64). Self-contained so streams are
// reproducible across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no cached second value).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [lo, hi] by rejection-free modulo (bias negligible
  // for the small ranges used here).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_u64() %
                                          static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Derives an independent stream from a label, for parallel episodes.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t label) {
    Rng r(seed ^ (0x517cc1b727220a95ull * (label + 1)));
    return r.next_u64();
  }

  static std::uint64_t derive(std::uint64_t seed, const std::string& label) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return derive(seed, h);
  }

 private:
  std::uint64_t state_;
};

}  // namespace poolid

#endif
