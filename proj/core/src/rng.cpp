#include "semisamp/rng.hpp"

#include <cmath>
#include <numbers>

namespace semisamp {

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling on the top of the range removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  // Box-Muller; one of the pair is discarded to keep the stream stateless.
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda > 30.0) {
    const double x = std::round(normal(lambda, std::sqrt(lambda)));
    return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
  }
  const double l = std::exp(-lambda);
  std::uint64_t k = 0;
  double p = uniform01();
  while (p > l) {
    ++k;
    p *= uniform01();
  }
  return k;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view frame_id, std::uint64_t epoch,
                          std::string_view purpose) {
  auto fnv = [](std::uint64_t h, std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    // Separator so ("ab","c") and ("a","bc") differ.
    h ^= 0xFF;
    h *= 0x100000001B3ULL;
    return h;
  };
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv(h, frame_id);
  h = fnv(h, purpose);
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ h);
  s = splitmix64(s ^ epoch);
  return s;
}

}  // namespace semisamp
