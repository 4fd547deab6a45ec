#include "semisamp/eval.hpp"

#include <algorithm>
#include <set>

#include "semisamp/error.hpp"

namespace semisamp {

double EvalOptions::threshold_for(const std::string& category) const {
  const auto it = iou_threshold.find(category);
  if (it != iou_threshold.end()) return it->second;
  if (default_iou) return *default_iou;
  throw InputError("no IoU threshold for category '" + category + "'");
}

double average_precision(const std::vector<bool>& ranked_is_tp, std::size_t num_positives,
                         std::size_t recall_positions) {
  if (recall_positions == 0) throw InputError("recall_positions must be at least 1");
  if (num_positives == 0) return 0.0;
  const std::size_t n = ranked_is_tp.size();
  std::vector<std::size_t> tp(n);
  std::size_t acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += ranked_is_tp[k] ? 1 : 0;
    tp[k] = acc;
  }
  // Interpolated precision: best precision at this rank or any later one.
  std::vector<double> best(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    best[k] = std::max(best[k + 1], static_cast<double>(tp[k]) / static_cast<double>(k + 1));
  }
  double sum = 0.0;
  std::size_t rank = 0;
  const std::size_t R = recall_positions;
  for (std::size_t j = 1; j <= R; ++j) {
    // First rank whose recall tp/num_positives reaches j/R, in integers.
    while (rank < n && tp[rank] * R < j * num_positives) ++rank;
    if (rank == n) break;
    sum += best[rank];
  }
  return sum / static_cast<double>(R);
}

ApResult evaluate_ap(std::span<const std::vector<Label>> predictions,
                     std::span<const std::vector<Label>> groundtruth, const EvalOptions& options) {
  if (options.recall_positions == 0) throw InputError("recall_positions must be at least 1");
  if (predictions.size() != groundtruth.size()) {
    throw InputError("predictions and groundtruth cover different frame counts");
  }
  std::set<std::string> categories;
  for (const auto& frame : groundtruth) {
    for (const Label& l : frame) categories.insert(l.category);
  }

  ApResult result;
  for (const std::string& category : categories) {
    const double thr = options.threshold_for(category);
    struct Pred {
      std::size_t frame;
      const Label* label;
    };
    std::vector<Pred> preds;
    std::vector<std::vector<const Label*>> gts(groundtruth.size());
    std::size_t npos = 0;
    for (std::size_t f = 0; f < groundtruth.size(); ++f) {
      for (const Label& l : groundtruth[f]) {
        if (l.category == category) {
          gts[f].push_back(&l);
          ++npos;
        }
      }
      for (const Label& l : predictions[f]) {
        if (l.category == category) preds.push_back({f, &l});
      }
    }
    std::stable_sort(preds.begin(), preds.end(), [](const Pred& a, const Pred& b) {
      return a.label->effective_score() > b.label->effective_score();
    });
    std::vector<std::vector<bool>> used(groundtruth.size());
    for (std::size_t f = 0; f < gts.size(); ++f) used[f].assign(gts[f].size(), false);
    std::vector<bool> is_tp;
    is_tp.reserve(preds.size());
    for (const Pred& p : preds) {
      double best = -1.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < gts[p.frame].size(); ++j) {
        if (used[p.frame][j]) continue;
        const double iou = iou_3d(p.label->box, gts[p.frame][j]->box);
        if (iou >= thr && iou > best) {
          best = iou;
          best_j = j;
        }
      }
      if (best >= 0.0) used[p.frame][best_j] = true;
      is_tp.push_back(best >= 0.0);
    }
    result.ap[category] = average_precision(is_tp, npos, options.recall_positions);
    result.num_groundtruth[category] = npos;
  }
  if (!result.ap.empty()) {
    double s = 0.0;
    for (const auto& [c, v] : result.ap) s += v;
    result.map = s / static_cast<double>(result.ap.size());
  }
  return result;
}

}  // namespace semisamp
