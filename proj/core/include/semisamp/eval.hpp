#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semisamp/io.hpp"
#include "semisamp/sample_db.hpp"

namespace semisamp {

inline constexpr std::size_t kDefaultRecallPositions = 40;

struct EvalOptions {
  /// Per-category 3D IoU match threshold.
  ThresholdMap iou_threshold;
  /// Used for categories absent from iou_threshold; when unset such a
  /// category is an input error.
  std::optional<double> default_iou;
  std::size_t recall_positions = kDefaultRecallPositions;

  double threshold_for(const std::string& category) const;
};

struct ApResult {
  /// Only categories with at least one groundtruth box.
  std::map<std::string, double> ap;
  std::map<std::string, std::size_t> num_groundtruth;
  /// Mean of `ap`; 0 when no category has groundtruth.
  double map = 0.0;
};

/// Ranked-sweep AP. Predictions are sorted by descending score (ties keep
/// frame order) and greedily matched to the unmatched groundtruth of the
/// same frame and category with the highest iou_3d at or above threshold.
/// AP averages interpolated precision over recalls {1/R, ..., 1}.
/// predictions[i] and groundtruth[i] describe the same frame.
ApResult evaluate_ap(std::span<const std::vector<Label>> predictions,
                     std::span<const std::vector<Label>> groundtruth, const EvalOptions& options);

/// AP from a ranked true/false-positive sequence against `num_positives`
/// groundtruth boxes.
double average_precision(const std::vector<bool>& ranked_is_tp, std::size_t num_positives,
                         std::size_t recall_positions);

}  // namespace semisamp
