#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ringqed {

/// Deterministic random stream. All samplers are hand-rolled on top of the
/// fully specified mt19937_64 sequence so that a given seed produces the same
/// draws in every build of this toolkit (std::*_distribution makes no such
/// promise).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next_u64() { return engine_(); }

  /// Exponential with mean `tau` via inverse CDF.
  double exponential(double tau) {
    // 1 - u is in (0, 1], so the log is finite.
    return -tau * std::log(1.0 - uniform());
  }

  /// Standard normal via Box-Muller (no caching: consumes two uniforms).
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Poisson draw; Knuth multiplication for small means, Hoermann's PTRD
  /// transformed rejection for large ones.
  std::uint64_t poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a 64-bit hash, used for deriving per-task seeds and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

/// SplitMix64 finalizer: decorrelates structured seed inputs.
std::uint64_t splitmix64(std::uint64_t x);

/// Per-task stream seed: parallel and serial execution consume identical
/// streams as long as each task derives its own seed from (base, tag).
std::uint64_t derive_seed(std::uint64_t base, std::string_view task_tag);

/// Per-index variant for sweep points.
std::uint64_t derive_seed(std::uint64_t base, std::string_view task_tag, std::uint64_t index);

}  // namespace ringqed
