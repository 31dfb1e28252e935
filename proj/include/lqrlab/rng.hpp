#pragma once

#include <cstdint>
#include <random>

namespace lqrlab {

/// Identifies one reproducible random stream. Identical (seed, stream)
/// pairs produce identical draws regardless of thread schedule.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Deterministic random source. The normal/uniform transforms are
/// implemented here (not via std:: distributions) so draws are identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(RngStream stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform01();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal (Box-Muller, cached spare).
  double normal();

  /// +1 or -1 with equal probability.
  double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lqrlab
