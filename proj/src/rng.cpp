#include "ringqed/rng.hpp"

#include <cmath>

namespace ringqed {

std::uint64_t Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < 30.0) {
    // Knuth: count uniforms until their product drops below exp(-lambda).
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  // PTRD, W. Hoermann, "The transformed rejection method for generating
  // Poisson random variables" (1993). Exact for lambda >= 10.
  const double smu = std::sqrt(lambda);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_lambda = std::log(lambda);

  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    double k = kf;
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = k * log_lambda - lambda - std::lgamma(k + 1.0);
    if (lhs <= rhs) return static_cast<std::uint64_t>(kf);
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view task_tag) {
  return splitmix64(splitmix64(base) ^ fnv1a64(task_tag));
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view task_tag, std::uint64_t index) {
  return splitmix64(derive_seed(base, task_tag) ^ splitmix64(index + 0x51ed270b0f4aull));
}

}  // namespace ringqed
