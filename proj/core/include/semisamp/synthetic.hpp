#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semisamp/io.hpp"
#include "semisamp/rng.hpp"

namespace semisamp {

/// Parameters of generated outdoor-like scenes: a ground plane of clutter
/// plus upright objects resting on it, none overlapping in BEV.
struct SceneSpec {
  std::vector<std::string> categories{"car", "pedestrian", "cyclist"};
  std::map<std::string, Vec3> nominal_size{
      {"car", {3.9, 1.6, 1.56}}, {"pedestrian", {0.8, 0.6, 1.73}}, {"cyclist", {1.76, 0.6, 1.73}}};
  double x_min = 0.0;
  double x_max = 70.0;
  double y_min = -35.0;
  double y_max = 35.0;
  std::size_t min_objects = 4;
  std::size_t max_objects = 12;
  std::size_t background_points = 4000;
  std::size_t points_per_object = 80;
  std::size_t channel_count = kDefaultChannelCount;
  /// Relative jitter applied to nominal sizes.
  double size_jitter = 0.1;
};

/// One scene with groundtruth labels and per-label instance masks. All
/// coordinates are float32-representable so the frame survives a .bin
/// round trip unchanged.
Frame generate_scene(const SceneSpec& spec, std::string frame_id, Rng& rng);

struct SyntheticDatasetSpec {
  SceneSpec scene;
  std::size_t labeled = 8;
  std::size_t unlabeled = 16;
  std::size_t eval = 8;
  std::uint64_t seed = 0;
};

/// Writes manifest.json plus per-frame files. Labeled and eval frames get
/// .labels and .masks; unlabeled frames get their annotations in .truth
/// only, which loaders treat as unlabeled.
DatasetManifest write_synthetic_dataset(const std::filesystem::path& root,
                                        const SyntheticDatasetSpec& spec);

/// Rounds through float32.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace semisamp
