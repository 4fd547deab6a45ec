#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace semisamp::cli {

/// Runs one subcommand. Returns 0 on success, 1 on data errors and 2 on
/// usage errors; diagnostics go to `err` as a single line.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

struct SyntheticBenchOptions {
  std::size_t points_per_frame = 100000;
  std::size_t candidates = 20;
  std::size_t frames = 8;
  std::size_t iterations = 400;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
};

struct BenchResult {
  std::size_t augmentations = 0;
  double seconds = 0.0;
  std::size_t accepted = 0;
  std::size_t output_points = 0;
  double per_second() const { return seconds > 0.0 ? augmentations / seconds : 0.0; }
};

/// Labeled-frame augmentation throughput on generated frames, each drawing
/// `candidates` gt samples.
BenchResult bench_synthetic(const SyntheticBenchOptions& options);

}  // namespace semisamp::cli
