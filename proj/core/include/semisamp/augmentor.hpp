#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semisamp/geometry.hpp"
#include "semisamp/io.hpp"
#include "semisamp/rng.hpp"
#include "semisamp/sample_db.hpp"

namespace semisamp {

/// The four sampling strategies: {gt, pseudo} samples onto
/// {labeled, unlabeled} frames.
enum class Strategy : std::size_t {
  gt_on_labeled = 0,
  pseudo_on_labeled = 1,
  gt_on_unlabeled = 2,
  pseudo_on_unlabeled = 3,
};
inline constexpr std::size_t kStrategyCount = 4;
std::string_view to_string(Strategy s);

struct StrategyFlags {
  bool gt_on_labeled = true;
  bool pseudo_on_labeled = true;
  bool gt_on_unlabeled = true;
  bool pseudo_on_unlabeled = true;

  bool any_labeled() const { return gt_on_labeled || pseudo_on_labeled; }
  bool any_unlabeled() const { return gt_on_unlabeled || pseudo_on_unlabeled; }
};

struct CategoryQuota {
  std::string category;
  std::size_t samples = 0;
};

struct AugmentationConfig {
  StrategyFlags strategies;
  /// Per-category draw count. The order is the fixed category queue used
  /// when shuffling is off.
  std::vector<CategoryQuota> samples_per_category;
  ThresholdMap tau_pseudo_sample;
  double tau_unlabeled_frame = 0.5;
  CollisionMode collision_mode = CollisionMode::bev;
  bool category_shuffle = true;
  std::optional<std::size_t> fade_epoch;
  bool remove_occluded_points = true;
  std::uint64_t seed = 0;

  std::vector<std::string> category_queue() const;
  std::size_t quota(std::string_view category) const;
  /// Throws InputError when a threshold leaves [0, 1].
  void validate() const;
};

/// KITTI-style: car/pedestrian/cyclist, BEV collisions, all four
/// strategies, thresholds 0.8/0.7/0.7 and 0.5 on unlabeled frames.
AugmentationConfig outdoor_preset();
/// Indoor: 2 samples per category, full3d collisions, gt sampling on both
/// frame kinds.
AugmentationConfig indoor_preset(const std::vector<std::string>& categories);

/// Fisher-Yates permutation when `shuffle` is set, otherwise the input
/// order. Consumes rng only when shuffling.
std::vector<std::string> shuffle_categories(std::vector<std::string> categories, bool shuffle,
                                            Rng& rng);

/// Greedy single pass: candidate i is accepted iff it collides with no
/// occupied box and no earlier accepted candidate. Returns accepted
/// positions in candidate order.
std::vector<std::size_t> plan_insertions(std::span<const OrientedBox3D> occupied,
                                         std::span<const OrientedBox3D> candidates,
                                         CollisionMode mode);
std::vector<ObjectSample> plan_insertions(std::span<const OrientedBox3D> occupied,
                                          std::span<const ObjectSample> candidates,
                                          CollisionMode mode);

struct ApplyResult {
  PointCloud cloud;
  std::size_t removed_points = 0;
};

/// Optionally deletes frame points inside any accepted box, then appends
/// every accepted sample's points in order. Throws InputError on channel
/// mismatch.
ApplyResult apply_insertions(const PointCloud& frame, std::span<const ObjectSample> accepted,
                             bool remove_occluded_points);

bool fade_active(std::size_t epoch, const AugmentationConfig& cfg);

struct CategoryCounts {
  std::size_t attempted = 0;
  std::size_t accepted = 0;
  friend bool operator==(const CategoryCounts&, const CategoryCounts&) = default;
};

struct PastedSample {
  Strategy strategy = Strategy::gt_on_labeled;
  SampleId sample = 0;
  Label label;
  friend bool operator==(const PastedSample&, const PastedSample&) = default;
};

struct InsertionReport {
  std::map<std::string, CategoryCounts> per_category;
  std::array<std::size_t, kStrategyCount> attempted_by_strategy{};
  std::array<std::size_t, kStrategyCount> accepted_by_strategy{};
  /// Every accepted sample with its label. On unlabeled frames this is the
  /// only place pasted labels appear.
  std::vector<PastedSample> pasted;
  std::size_t removed_points = 0;

  std::size_t total_accepted() const;
  friend bool operator==(const InsertionReport&, const InsertionReport&) = default;
};

struct AugmentedFrame {
  PointCloud cloud;
  std::vector<Label> supervising_labels;
  /// Pseudo labels that blocked placement (unlabeled frames only).
  std::vector<Label> collision_anchors;
  InsertionReport report;
};

/// Views prepared once per (databases, config) pair: the gt database as is
/// and the pseudo database filtered by tau_pseudo_sample. Refers to both
/// databases, which must outlive it.
class SamplingSources {
 public:
  SamplingSources(const SampleDatabase& gt_db, const SampleDatabase& pseudo_db,
                  const AugmentationConfig& cfg);

  const DatabaseView& gt() const { return gt_; }
  const DatabaseView& pseudo() const { return pseudo_; }

 private:
  DatabaseView gt_;
  DatabaseView pseudo_;
};

/// Pastes gt and/or pseudo samples against the frame's groundtruth boxes.
/// Pasted labels join the supervising labels. Returns the frame unchanged
/// while fade is active.
AugmentedFrame augment_labeled_frame(const Frame& frame, const SamplingSources& sources,
                                     const AugmentationConfig& cfg, std::size_t epoch, Rng& rng);
AugmentedFrame augment_labeled_frame(const Frame& frame, const SampleDatabase& gt_db,
                                     const SampleDatabase& pseudo_db,
                                     const AugmentationConfig& cfg, std::size_t epoch, Rng& rng);

/// Pseudo labels scoring above tau_unlabeled_frame become collision
/// anchors. Pasted samples never supervise: supervising_labels is empty.
/// Throws InputError for a pseudo label without score.
AugmentedFrame augment_unlabeled_frame(const Frame& frame, std::span<const Label> pseudo_labels,
                                       const SamplingSources& sources,
                                       const AugmentationConfig& cfg, std::size_t epoch,
                                       Rng& rng);
AugmentedFrame augment_unlabeled_frame(const Frame& frame, std::span<const Label> pseudo_labels,
                                       const SampleDatabase& gt_db,
                                       const SampleDatabase& pseudo_db,
                                       const AugmentationConfig& cfg, std::size_t epoch,
                                       Rng& rng);

/// Anchors kept by an unlabeled-frame augmentation: score > tau.
std::vector<Label> select_collision_anchors(std::span<const Label> pseudo_labels, double tau);

}  // namespace semisamp
