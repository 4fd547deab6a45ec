#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semisamp/augmentor.hpp"
#include "semisamp/eval.hpp"
#include "semisamp/io.hpp"
#include "semisamp/rng.hpp"

namespace semisamp {

// A desk-scale stand-in for mean-teacher training. "Models" are parameter
// vectors whose squashed mean is a skill in [0, 1]; detectors are
// perturbations of the true boxes whose noise shrinks with skill. None of
// this models gradient descent. It closes the loop so that the sampling
// pipeline's plumbing (thresholds, anchors, fade, EMA) can be observed.

struct ModelState {
  std::vector<double> params;

  /// Logistic of the parameter mean.
  double skill() const;
  /// `count` equal parameters whose skill is `skill` (clamped into (0, 1)).
  static ModelState with_skill(std::size_t count, double skill);
};

/// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
ModelState ema_update(const ModelState& teacher, const ModelState& student, double alpha);

struct ScoreModel {
  double tp_mean = 0.75;
  double fp_mean = 0.35;
  double spread = 0.12;
  /// Score lost per unit of box perturbation magnitude.
  double perturbation_penalty = 0.3;
};

struct NoiseModel {
  double center_sigma = 0.4;
  double size_sigma = 0.15;
  double yaw_sigma = 0.2;
  double drop_rate = 0.4;
  /// Expected false positives per frame.
  double fp_rate = 3.0;
  ScoreModel score;
  /// False positives are placed uniformly in this BEV region with the
  /// category's nominal size.
  double x_min = 0.0, x_max = 70.0, y_min = -35.0, y_max = 35.0;
  std::vector<std::string> categories{"car", "pedestrian", "cyclist"};
  std::map<std::string, Vec3> nominal_size{
      {"car", {3.9, 1.6, 1.56}}, {"pedestrian", {0.8, 0.6, 1.73}}, {"cyclist", {1.76, 0.6, 1.73}}};

  void validate() const;
};

/// Each true box is dropped with probability drop_rate * (1 - skill);
/// survivors get Gaussian noise scaled by (1 - skill); Poisson(fp_rate)
/// false positives are added. Output labels are source=pseudo and scored.
std::vector<Label> synthetic_detect(std::span<const Label> groundtruth, const NoiseModel& noise,
                                    double skill, Rng& rng);

/// Keeps detections whose score is strictly above their category's
/// threshold. Throws InputError for a category missing from the map.
std::vector<Label> filter_pseudo_labels(std::span<const Label> detections,
                                        const ThresholdMap& thresholds);

struct MatchCounts {
  std::size_t true_positives = 0;
  std::size_t predictions = 0;
  std::size_t groundtruth = 0;
  /// 1 when there are no predictions.
  double precision() const;
  /// 1 when there is no groundtruth.
  double recall() const;
  MatchCounts& operator+=(const MatchCounts& o);
};

/// Greedy one-to-one matching by descending score with iou_3d at or above
/// the category's threshold. is_tp, when given, receives one flag per
/// prediction in input order.
MatchCounts match_predictions(std::span<const Label> predictions, std::span<const Label> truth,
                              const EvalOptions& iou, std::vector<bool>* is_tp = nullptr);

struct SimulationConfig {
  std::size_t labeled_batch = 4;
  std::size_t unlabeled_batch = 8;
  std::size_t epochs = 10;
  double ema_alpha = 0.999;
  /// Teacher pseudo-label removal threshold; distinct from the sampling
  /// thresholds in AugmentationConfig.
  ThresholdMap pseudo_score_threshold;
  double default_pseudo_score_threshold = 0.5;
  AugmentationConfig augmentation = outdoor_preset();
  EvalOptions evaluation{{{"car", 0.7}, {"pedestrian", 0.5}, {"cyclist", 0.5}}, 0.5,
                         kDefaultRecallPositions};
  NoiseModel noise;
  std::size_t param_count = 8;
  double initial_skill = 0.3;
  double learning_rate = 0.05;
  double pseudo_db_min_score = 0.0;
  std::size_t min_points = kDefaultMinPoints;
  /// Rebuild the pseudo database from current teacher detections every N
  /// epochs. Off by default: built once from epoch-0 detections.
  std::optional<std::size_t> pseudo_db_rebuild_interval;
  std::size_t workers = 1;

  double pseudo_threshold_for(const std::string& category) const;
  ThresholdMap pseudo_thresholds() const;
  void validate() const;
};

/// Unlabeled and eval frames carry their true annotations separately so
/// the harness can score pseudo labels; the pipeline never sees them.
struct SimFrame {
  Frame frame;
  std::vector<Label> truth;
};

struct SimDataset {
  std::vector<std::string> categories;
  std::vector<Frame> labeled;
  std::vector<SimFrame> unlabeled;
  /// Falls back to the unlabeled split when empty.
  std::vector<SimFrame> eval;
};

/// Loads the manifest's splits. Unlabeled frames take truth from .truth
/// files; eval frames from .labels or .truth.
SimDataset load_sim_dataset(const DatasetManifest& manifest);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t batches = 0;
  bool fade_active = false;
  std::size_t raw_detections = 0;
  std::size_t pseudo_labels = 0;
  double pseudo_precision = 1.0;
  double pseudo_recall = 1.0;
  std::size_t collision_anchors = 0;
  std::array<std::size_t, kStrategyCount> pasted{};
  std::size_t correct_signals = 0;
  std::size_t wrong_signals = 0;
  double teacher_skill = 0.0;
  double student_skill = 0.0;
  double map = 0.0;
  std::map<std::string, double> ap;
  std::size_t gt_db_samples = 0;
  std::size_t pseudo_db_samples = 0;

  std::size_t total_pasted() const;
};

/// One structured record per epoch, newline terminated.
std::string to_json_line(const EpochMetrics& m);

using EpochSink = std::function<void(const EpochMetrics&)>;

/// Per epoch: teacher detects on clean unlabeled frames; detections are
/// filtered into pseudo labels; labeled and unlabeled frames are augmented;
/// the student gains or loses skill by its (correct - wrong) supervision;
/// the teacher follows by EMA; teacher AP is measured on the eval split.
std::vector<EpochMetrics> run_simulation(const SimulationConfig& cfg, const SimDataset& data,
                                         std::uint64_t seed, const EpochSink& sink = {});

}  // namespace semisamp
