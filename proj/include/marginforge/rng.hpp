#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace mf {

// Deterministic, platform-independent random stream (SplitMix64 core).
// Standard-library distributions are implementation-defined, which would break
// byte-identical reports across toolchains, so conversions to doubles are done
// by hand here. Substreams are derived from the stream's seed and a name, so a
// single top-level seed fans out to one independent stream per module without
// any ordering coupling between consumers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    ++draws_;
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Raw 64-bit words consumed so far; lets tests account for the sample
  // complexity of randomized estimators without instrumenting them.
  std::uint64_t draw_count() const { return draws_; }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [0, bound). Unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Standard normal via Box-Muller (two uniforms per draw, no cached spare,
  // so the consumption pattern is stable).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent stream derived from this stream's seed and a label.
  RngStream substream(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label
    for (const char ch : name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ull;
    }
    // Mix the label hash with the parent seed through one SplitMix round.
    std::uint64_t z = seed_ ^ (h + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return RngStream(z ^ (z >> 31));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

}  // namespace mf
