#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace drocc {

/// Seeded random source shared by generators and trainers. Streams are
/// reproducible for a given seed on a given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  /// Fill `out` with a uniformly distributed unit vector.
  void unit_vector(std::span<double> out);

  /// Independent child stream, e.g. one per epoch or per seed.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace drocc
