#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace semisamp {

/// Seeded random stream. Distributions are implemented here rather than
/// taken from <random> so that sequences are identical across standard
/// library implementations; only the engine comes from the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform01() < p; }
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  std::uint64_t poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream seed for one (frame, epoch, purpose) triple under a
/// root seed. Streams never depend on the order in which frames are
/// processed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view frame_id, std::uint64_t epoch,
                          std::string_view purpose);

inline Rng frame_stream(std::uint64_t root, std::string_view frame_id, std::uint64_t epoch,
                        std::string_view purpose) {
  return Rng(derive_seed(root, frame_id, epoch, purpose));
}

}  // namespace semisamp
