#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

namespace psdsim {

// Deterministic, seed-derived random streams. Each (seed, key) pair names an
// independent stream: "src/<id>/gen", "bsa/<id>/swap", "link/<id>/drift", ...
// so event ordering never changes which stream a draw comes from.
//
// The generator is splitmix64 seeded from the master seed and an FNV-1a hash
// of the key. Uniform/normal transforms are hand-rolled so byte-identical
// output does not depend on the standard library's distribution choices.
class RandomStream {
 public:
  RandomStream() : state_(0x9e3779b97f4a7c15ull) {}
  RandomStream(std::uint64_t seed, std::string_view key) : state_(mix(seed, fnv1a(key))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool next_bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_double() < p;
  }

  // Standard normal via Box-Muller (one value per call; the partner draw is
  // discarded to keep the consumption pattern simple).
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    return z ^ (z >> 27);
  }

  std::uint64_t state_;
};

inline RandomStream derive_stream(std::uint64_t seed, const std::string& key) {
  return RandomStream(seed, key);
}

}  // namespace psdsim
