#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "semisamp/augmentor.hpp"
#include "semisamp/eval.hpp"
#include "semisamp/geometry.hpp"
#include "semisamp/io.hpp"
#include "semisamp/sample_db.hpp"

namespace semisamp::testing {

OrientedBox3D box(double cx, double cy, double cz, double dx, double dy, double dz,
                  double yaw = 0.0);

Label gt_label(std::string category, const OrientedBox3D& b);
Label pseudo_label(std::string category, const OrientedBox3D& b, double score);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "semisamp");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Monte-Carlo IoU: uniform samples over the overlap of both boxes'
// world-aligned bounds, classified by an independent inverse-rotation test. The xy projection of
// the same samples gives the BEV estimate. Intersections are estimated;
// box areas and volumes are exact.
struct McIou {
  double bev = 0.0;
  double iou3d = 0.0;
};
McIou monte_carlo_iou(const OrientedBox3D& a, const OrientedBox3D& b, std::size_t samples,
                      std::uint64_t seed);

/// Pair of boxes that overlap often: nearby centers, random sizes and yaws.
std::pair<OrientedBox3D, OrientedBox3D> random_box_pair(std::mt19937_64& rng);

// Exhaustive AP oracle for tiny instances: enumerates every injective
// assignment of predictions to groundtruth, keeps the one that follows the
// ranked highest-IoU greedy rule, and replays the sweep with exact
// rational recall comparisons.
ApResult exhaustive_ap(const std::vector<std::vector<Label>>& predictions,
                       const std::vector<std::vector<Label>>& groundtruth,
                       const EvalOptions& options);

struct TinyApInstance {
  std::vector<std::vector<Label>> predictions;
  std::vector<std::vector<Label>> groundtruth;
};
/// Up to 5 predictions and 3 groundtruth boxes over 1-2 frames and two
/// categories, with distinct scores.
TinyApInstance random_tiny_ap_instance(std::mt19937_64& rng);

/// Labeled frames with gt and masks, unlabeled frames with noisy scored
/// pseudo labels, and the databases built from them.
struct World {
  std::vector<Frame> labeled;
  std::vector<Frame> unlabeled;
  std::vector<std::vector<Label>> unlabeled_truth;
  std::vector<std::vector<Label>> pseudo;
  SampleDatabase gt_db{DatabaseKind::gt, kDefaultChannelCount, {}};
  SampleDatabase pseudo_db{DatabaseKind::pseudo, kDefaultChannelCount, {}};
};

struct WorldSpec {
  std::size_t labeled = 6;
  std::size_t unlabeled = 6;
  std::size_t background_points = 600;
  double detector_skill = 0.5;
  std::uint64_t seed = 1;
};

World make_world(const WorldSpec& spec);

/// Violations of the no-collision invariant in one augmentation: pasted
/// boxes against the anchors and against each other. A pair violates when
/// rotated_iou_bev > 1e-9 and, under full3d, the boxes also overlap
/// vertically.
std::size_t collision_violations(std::span<const Label> anchors,
                                 std::span<const PastedSample> pasted, CollisionMode mode);

/// Samples with identical geometry in every category, spread over a square
/// region of side `extent`: sample i of each category sits at the same box.
SampleDatabase mirrored_category_db(const std::vector<std::string>& categories,
                                    std::size_t per_category, double extent, std::uint64_t seed);

}  // namespace semisamp::testing
