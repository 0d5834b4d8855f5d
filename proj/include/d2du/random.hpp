#pragma once

#include <cstdint>
#include <random>

namespace d2du {

/// Derives an independent stream seed from a base seed and a salt.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

/// Seeded generator whose draws do not depend on the standard library's
/// distribution implementations, so streams are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Exponential with unit mean.
  double exponential();

 private:
  std::mt19937_64 engine_;
};

}  // namespace d2du
