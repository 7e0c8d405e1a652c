// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <random>

namespace stanvi {

/// Seeded random source with platform-independent variates.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std distributions are not, so the continuous variates are
/// derived here:
///   uniform()  = ((x >> 11) + 0.5) * 2^-53, always in the open interval (0, 1)
///   normal()   = Box-Muller on two uniforms u1, u2:
///                r = sqrt(-2 log u1), returns r cos(2 pi u2) and caches
///                r sin(2 pi u2) for the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal();

  /// Marsaglia-Tsang for shape >= 1; boosted by U^(1/shape) below 1.
  double gamma(double shape);

  /// Seed for an independent stream (used to hand each worker its own Rng).
  std::uint64_t split() { return engine_(); }

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stanvi
