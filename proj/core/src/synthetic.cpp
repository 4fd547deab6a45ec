#include "semisamp/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "semisamp/error.hpp"

namespace semisamp {

namespace fs = std::filesystem;

namespace {

void push_point(std::vector<double>& values, const Vec3& p, double intensity,
                std::size_t channels) {
  values.push_back(p.x);
  values.push_back(p.y);
  values.push_back(p.z);
  if (channels > 3) values.push_back(to_f32(intensity));
  for (std::size_t c = 4; c < channels; ++c) values.push_back(0.0);
}

}  // namespace

Frame generate_scene(const SceneSpec& spec, std::string frame_id, Rng& rng) {
  if (spec.categories.empty()) throw InputError("scene spec has no categories");
  if (spec.max_objects < spec.min_objects) throw InputError("max_objects < min_objects");
  Frame frame;
  frame.frame_id = std::move(frame_id);
  const std::size_t ch = spec.channel_count;

  const std::size_t want =
      spec.min_objects + static_cast<std::size_t>(rng.below(spec.max_objects - spec.min_objects + 1));
  for (std::size_t attempt = 0; frame.labels.size() < want && attempt < want * 50; ++attempt) {
    const auto& category = spec.categories[rng.below(spec.categories.size())];
    const auto it = spec.nominal_size.find(category);
    const Vec3 nominal = it != spec.nominal_size.end() ? it->second : Vec3{1.0, 1.0, 1.0};
    auto jitter = [&](double v) { return to_f32(v * (1.0 + spec.size_jitter * rng.uniform(-1, 1))); };
    const Vec3 size{jitter(nominal.x), jitter(nominal.y), jitter(nominal.z)};
    const Vec3 center{to_f32(rng.uniform(spec.x_min, spec.x_max)),
                      to_f32(rng.uniform(spec.y_min, spec.y_max)), to_f32(0.5 * size.z)};
    const double yaw = to_f32(rng.uniform(-std::numbers::pi, std::numbers::pi));
    const OrientedBox3D box(center, size, yaw);
    bool clash = false;
    for (const Label& l : frame.labels) clash = clash || bev_overlap(l.box, box);
    if (clash) continue;
    frame.labels.push_back({category, box, std::nullopt, LabelSource::groundtruth});
  }

  std::vector<double> values;
  values.reserve((spec.background_points + frame.labels.size() * spec.points_per_object) * ch);
  for (std::size_t i = 0; i < spec.background_points; ++i) {
    const Vec3 p{to_f32(rng.uniform(spec.x_min, spec.x_max)),
                 to_f32(rng.uniform(spec.y_min, spec.y_max)), to_f32(rng.uniform(-0.3, -0.05))};
    push_point(values, p, rng.uniform01(), ch);
  }
  InstanceMasks masks;
  std::size_t next_index = spec.background_points;
  for (std::size_t li = 0; li < frame.labels.size(); ++li) {
    const OrientedBox3D& b = frame.labels[li].box;
    auto& mask = masks[li];
    while (mask.size() < spec.points_per_object) {
      const double lx = rng.uniform(-0.48, 0.48) * b.size().x;
      const double ly = rng.uniform(-0.48, 0.48) * b.size().y;
      const double lz = rng.uniform(-0.48, 0.48) * b.size().z;
      const Vec3 p{to_f32(b.center().x + b.cos_yaw() * lx - b.sin_yaw() * ly),
                   to_f32(b.center().y + b.sin_yaw() * lx + b.cos_yaw() * ly),
                   to_f32(b.center().z + lz)};
      if (!point_in_box(p, b)) continue;
      push_point(values, p, rng.uniform01(), ch);
      mask.push_back(next_index++);
    }
  }
  frame.cloud = PointCloud(ch, std::move(values));
  frame.instance_masks = std::move(masks);
  return frame;
}

DatasetManifest write_synthetic_dataset(const fs::path& root, const SyntheticDatasetSpec& spec) {
  DatasetManifest m;
  m.root = root;
  m.channel_count = spec.scene.channel_count;
  m.categories = spec.scene.categories;
  fs::create_directories(root);
  auto emit = [&](const std::string& prefix, std::size_t count, std::vector<std::string>& ids,
                  bool labeled) {
    for (std::size_t i = 0; i < count; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%06zu", prefix.c_str(), i);
      Rng rng = frame_stream(spec.seed, buf, 0, "scene");
      Frame f = generate_scene(spec.scene, buf, rng);
      const FramePaths p = frame_paths(root, f.frame_id);
      write_file_bytes(p.points, write_points_bin(f.cloud));
      if (labeled) {
        write_label_file(p.labels, f.labels);
        write_text_file(p.masks, write_masks(*f.instance_masks));
      } else {
        write_label_file(p.truth, f.labels);
      }
      ids.push_back(f.frame_id);
    }
  };
  emit("l", spec.labeled, m.labeled, true);
  emit("u", spec.unlabeled, m.unlabeled, false);
  emit("e", spec.eval, m.eval, true);
  write_manifest(m);
  return m;
}

}  // namespace semisamp
