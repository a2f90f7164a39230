#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tokgeo {

// Bumped whenever the mapping from seed to drawn values changes.
inline constexpr int kRngVersion = 1;

// Mixes a 64-bit key into a well-spread 64-bit value (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

// Derives an independent stream seed from a parent seed and a label, e.g. a
// prompt id or a Monte Carlo chunk number.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

// Seeded generator with platform-independent conversions. The standard
// distributions are implementation-defined, so uniform, bounded-integer and
// normal draws are derived here directly from the mt19937_64 bit stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a logarithm argument.
  double uniform_positive() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  // Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller, one value per call.
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace tokgeo
