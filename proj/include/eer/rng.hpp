#pragma once

#include <cstdint>
#include <random>

namespace eer {

/// Deterministic random stream: 64-bit Mersenne Twister (mt19937_64).
/// Uniform doubles take the top 53 bits of each draw scaled by 2⁻⁵³;
/// bounded integers use rejection sampling; normals use Box–Muller.
/// Identical seeds give bit-identical streams on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Returns a generator seeded with `seed`.
inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace eer
