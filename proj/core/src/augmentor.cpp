#include "semisamp/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "semisamp/error.hpp"

namespace semisamp {

namespace {

struct Candidate {
  Strategy strategy;
  const SampleDatabase* db;
  SampleId id;
};

struct Aabb {
  double x0, x1, y0, y1, z0, z1;
  bool contains(const Vec3& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1 && p.z >= z0 && p.z <= z1;
  }
};

Aabb bounds(const OrientedBox3D& b) {
  const auto corners = b.bev_corners();
  Aabb a{corners[0].x, corners[0].x, corners[0].y, corners[0].y, b.z_min(), b.z_max()};
  for (const Vec2& c : corners) {
    a.x0 = std::min(a.x0, c.x);
    a.x1 = std::max(a.x1, c.x);
    a.y0 = std::min(a.y0, c.y);
    a.y1 = std::max(a.y1, c.y);
  }
  return a;
}

// Uniform BEV grid over the accepted boxes' bounds. Each cell lists the
// boxes whose bounds touch it.
class BoxGrid {
 public:
  explicit BoxGrid(std::span<const ObjectSample> boxes) {
    aabbs_.reserve(boxes.size());
    for (const auto& s : boxes) aabbs_.push_back(bounds(s.box));
    if (aabbs_.empty()) return;
    all_ = aabbs_.front();
    for (const Aabb& a : aabbs_) {
      all_.x0 = std::min(all_.x0, a.x0);
      all_.x1 = std::max(all_.x1, a.x1);
      all_.y0 = std::min(all_.y0, a.y0);
      all_.y1 = std::max(all_.y1, a.y1);
      all_.z0 = std::min(all_.z0, a.z0);
      all_.z1 = std::max(all_.z1, a.z1);
    }
    const double extent = std::max(all_.x1 - all_.x0, all_.y1 - all_.y0);
    cell_ = std::max(extent / kMaxCells, 1.0);
    nx_ = cell_index(all_.x1 - all_.x0) + 1;
    ny_ = cell_index(all_.y1 - all_.y0) + 1;
    std::vector<std::vector<std::uint32_t>> lists(nx_ * ny_);
    for (std::size_t b = 0; b < aabbs_.size(); ++b) {
      const Aabb& a = aabbs_[b];
      for (std::size_t ix = cell_index(a.x0 - all_.x0); ix <= cell_index(a.x1 - all_.x0); ++ix) {
        for (std::size_t iy = cell_index(a.y0 - all_.y0); iy <= cell_index(a.y1 - all_.y0); ++iy) {
          lists[ix * ny_ + iy].push_back(static_cast<std::uint32_t>(b));
        }
      }
    }
    offsets_.reserve(lists.size() + 1);
    offsets_.push_back(0);
    for (const auto& l : lists) {
      ids_.insert(ids_.end(), l.begin(), l.end());
      offsets_.push_back(ids_.size());
    }
  }

  bool inside_any(const Vec3& p, std::span<const ObjectSample> boxes) const {
    if (aabbs_.empty() || !all_.contains(p)) return false;
    const std::size_t cell = cell_index(p.x - all_.x0) * ny_ + cell_index(p.y - all_.y0);
    for (std::size_t k = offsets_[cell]; k < offsets_[cell + 1]; ++k) {
      const std::uint32_t b = ids_[k];
      if (aabbs_[b].contains(p) && point_in_box(p, boxes[b].box)) return true;
    }
    return false;
  }

 private:
  static constexpr double kMaxCells = 128.0;

  std::size_t cell_index(double offset) const {
    return static_cast<std::size_t>(std::max(offset, 0.0) / cell_);
  }

  std::vector<Aabb> aabbs_;
  Aabb all_{};
  double cell_ = 1.0;
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> ids_;
};

void draw_into(std::vector<Candidate>& out, Strategy strategy, const DatabaseView& view,
               const std::string& category, std::size_t k, std::string_view frame_id, Rng& rng) {
  for (SampleId id : draw_sample_ids(view, category, k, rng)) {
    // Samples stay at their source coordinates, so a sample drawn from the
    // target frame would duplicate its own object.
    if (view.database().record(id).source_frame == frame_id) continue;
    out.push_back({strategy, &view.database(), id});
  }
}

Label pasted_label(const SampleRecord& r, Strategy s) {
  Label l;
  l.category = r.category;
  l.box = r.box;
  const bool from_gt = s == Strategy::gt_on_labeled || s == Strategy::gt_on_unlabeled;
  l.source = from_gt ? LabelSource::pasted_gt : LabelSource::pasted_pseudo;
  l.score = r.score;
  return l;
}

// Shared core of both frame kinds: draw per category in queue order, plan
// against `occupied`, paste.
AugmentedFrame run_pipeline(const Frame& frame, std::span<const OrientedBox3D> occupied,
                            const SamplingSources& sources, const AugmentationConfig& cfg,
                            bool gt_flag, Strategy gt_strategy, bool pseudo_flag,
                            Strategy pseudo_strategy, Rng& rng) {
  AugmentedFrame out;
  const auto queue = shuffle_categories(cfg.category_queue(), cfg.category_shuffle, rng);
  std::vector<Candidate> cands;
  for (const auto& category : queue) {
    const std::size_t k = cfg.quota(category);
    const std::size_t before = cands.size();
    if (gt_flag) draw_into(cands, gt_strategy, sources.gt(), category, k, frame.frame_id, rng);
    if (pseudo_flag) {
      draw_into(cands, pseudo_strategy, sources.pseudo(), category, k, frame.frame_id, rng);
    }
    out.report.per_category[category].attempted += cands.size() - before;
  }
  for (const Candidate& c : cands) ++out.report.attempted_by_strategy[std::size_t(c.strategy)];

  std::vector<OrientedBox3D> boxes;
  boxes.reserve(cands.size());
  for (const Candidate& c : cands) boxes.push_back(c.db->record(c.id).box);
  const auto accepted = plan_insertions(occupied, boxes, cfg.collision_mode);

  std::vector<ObjectSample> samples;
  samples.reserve(accepted.size());
  for (std::size_t i : accepted) {
    const Candidate& c = cands[i];
    const SampleRecord& r = c.db->record(c.id);
    samples.push_back(c.db->materialize(c.id));
    ++out.report.per_category[r.category].accepted;
    ++out.report.accepted_by_strategy[std::size_t(c.strategy)];
    out.report.pasted.push_back({c.strategy, c.id, pasted_label(r, c.strategy)});
  }
  auto applied = apply_insertions(frame.cloud, samples, cfg.remove_occluded_points);
  out.cloud = std::move(applied.cloud);
  out.report.removed_points = applied.removed_points;
  return out;
}

void seed_report_categories(InsertionReport& report, const AugmentationConfig& cfg) {
  for (const auto& q : cfg.samples_per_category) report.per_category[q.category];
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::gt_on_labeled: return "gt_on_labeled";
    case Strategy::pseudo_on_labeled: return "pseudo_on_labeled";
    case Strategy::gt_on_unlabeled: return "gt_on_unlabeled";
    case Strategy::pseudo_on_unlabeled: return "pseudo_on_unlabeled";
  }
  return "gt_on_labeled";
}

std::vector<std::string> AugmentationConfig::category_queue() const {
  std::vector<std::string> q;
  q.reserve(samples_per_category.size());
  for (const auto& c : samples_per_category) q.push_back(c.category);
  return q;
}

std::size_t AugmentationConfig::quota(std::string_view category) const {
  for (const auto& c : samples_per_category) {
    if (c.category == category) return c.samples;
  }
  return 0;
}

void AugmentationConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(tau_unlabeled_frame)) throw InputError("tau_unlabeled_frame outside [0, 1]");
  for (const auto& [c, t] : tau_pseudo_sample) {
    if (!in_unit(t)) throw InputError("tau_pseudo_sample for '" + c + "' outside [0, 1]");
  }
  for (std::size_t i = 0; i < samples_per_category.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (samples_per_category[i].category == samples_per_category[j].category) {
        throw InputError("category '" + samples_per_category[i].category + "' listed twice");
      }
    }
  }
}

AugmentationConfig outdoor_preset() {
  AugmentationConfig cfg;
  cfg.samples_per_category = {{"car", 15}, {"pedestrian", 10}, {"cyclist", 10}};
  cfg.tau_pseudo_sample = {{"car", 0.8}, {"pedestrian", 0.7}, {"cyclist", 0.7}};
  cfg.tau_unlabeled_frame = 0.5;
  cfg.collision_mode = CollisionMode::bev;
  return cfg;
}

AugmentationConfig indoor_preset(const std::vector<std::string>& categories) {
  AugmentationConfig cfg;
  cfg.strategies = {true, false, true, false};
  for (const auto& c : categories) {
    cfg.samples_per_category.push_back({c, 2});
    cfg.tau_pseudo_sample[c] = 0.5;
  }
  cfg.collision_mode = CollisionMode::full3d;
  return cfg;
}

std::vector<std::string> shuffle_categories(std::vector<std::string> categories, bool shuffle,
                                            Rng& rng) {
  if (!shuffle) return categories;
  for (std::size_t i = categories.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(categories[i - 1], categories[j]);
  }
  return categories;
}

std::vector<std::size_t> plan_insertions(std::span<const OrientedBox3D> occupied,
                                         std::span<const OrientedBox3D> candidates,
                                         CollisionMode mode) {
  std::vector<OrientedBox3D> taken(occupied.begin(), occupied.end());
  std::vector<std::size_t> accepted;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const OrientedBox3D& c = candidates[i];
    const bool clash = std::any_of(taken.begin(), taken.end(),
                                   [&](const OrientedBox3D& t) { return boxes_collide(c, t, mode); });
    if (clash) continue;
    accepted.push_back(i);
    taken.push_back(c);
  }
  return accepted;
}

std::vector<ObjectSample> plan_insertions(std::span<const OrientedBox3D> occupied,
                                          std::span<const ObjectSample> candidates,
                                          CollisionMode mode) {
  std::vector<OrientedBox3D> boxes;
  boxes.reserve(candidates.size());
  for (const auto& s : candidates) boxes.push_back(s.box);
  std::vector<ObjectSample> out;
  for (std::size_t i : plan_insertions(occupied, boxes, mode)) out.push_back(candidates[i]);
  return out;
}

ApplyResult apply_insertions(const PointCloud& frame, std::span<const ObjectSample> accepted,
                             bool remove_occluded_points) {
  const std::size_t c = frame.channel_count();
  std::size_t added = 0;
  for (const auto& s : accepted) {
    if (s.points.channel_count() != c) {
      throw InputError("sample from '" + s.source_frame + "' has " +
                       std::to_string(s.points.channel_count()) + " channels, frame has " +
                       std::to_string(c));
    }
    added += s.points.size();
  }
  if (accepted.empty()) return {frame, 0};

  const auto src = frame.values();
  std::vector<double> values;
  values.reserve(src.size() + added * c);
  std::size_t removed = 0;
  if (remove_occluded_points) {
    const BoxGrid grid(accepted);
    // Kept points are copied in contiguous runs.
    std::size_t run_start = 0;
    const std::size_t n = frame.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = frame.xyz(i);
      if (!grid.inside_any(p, accepted)) continue;
      values.insert(values.end(), src.begin() + run_start * c, src.begin() + i * c);
      run_start = i + 1;
      ++removed;
    }
    values.insert(values.end(), src.begin() + run_start * c, src.end());
  } else {
    values.assign(src.begin(), src.end());
  }
  for (const auto& s : accepted) {
    const auto v = s.points.values();
    values.insert(values.end(), v.begin(), v.end());
  }
  return {PointCloud(c, std::move(values)), removed};
}

bool fade_active(std::size_t epoch, const AugmentationConfig& cfg) {
  return cfg.fade_epoch.has_value() && epoch >= *cfg.fade_epoch;
}

std::size_t InsertionReport::total_accepted() const {
  std::size_t n = 0;
  for (std::size_t v : accepted_by_strategy) n += v;
  return n;
}

SamplingSources::SamplingSources(const SampleDatabase& gt_db, const SampleDatabase& pseudo_db,
                                 const AugmentationConfig& cfg)
    : gt_(gt_db),
      pseudo_(cfg.strategies.pseudo_on_labeled || cfg.strategies.pseudo_on_unlabeled
                  ? filter_by_score(pseudo_db, cfg.tau_pseudo_sample)
                  : DatabaseView(pseudo_db)) {
  if (gt_db.kind() != DatabaseKind::gt) throw InputError("gt database has kind pseudo");
  if (pseudo_db.kind() != DatabaseKind::pseudo) throw InputError("pseudo database has kind gt");
}

AugmentedFrame augment_labeled_frame(const Frame& frame, const SamplingSources& sources,
                                     const AugmentationConfig& cfg, std::size_t epoch, Rng& rng) {
  const auto& st = cfg.strategies;
  if (fade_active(epoch, cfg) || !st.any_labeled()) {
    AugmentedFrame out{frame.cloud, frame.labels, {}, {}};
    seed_report_categories(out.report, cfg);
    return out;
  }
  std::vector<OrientedBox3D> occupied;
  occupied.reserve(frame.labels.size());
  for (const Label& l : frame.labels) occupied.push_back(l.box);

  AugmentedFrame out = run_pipeline(frame, occupied, sources, cfg, st.gt_on_labeled,
                                    Strategy::gt_on_labeled, st.pseudo_on_labeled,
                                    Strategy::pseudo_on_labeled, rng);
  seed_report_categories(out.report, cfg);
  out.supervising_labels = frame.labels;
  for (const auto& p : out.report.pasted) out.supervising_labels.push_back(p.label);
  return out;
}

AugmentedFrame augment_labeled_frame(const Frame& frame, const SampleDatabase& gt_db,
                                     const SampleDatabase& pseudo_db,
                                     const AugmentationConfig& cfg, std::size_t epoch, Rng& rng) {
  const SamplingSources sources(gt_db, pseudo_db, cfg);
  return augment_labeled_frame(frame, sources, cfg, epoch, rng);
}

std::vector<Label> select_collision_anchors(std::span<const Label> pseudo_labels, double tau) {
  std::vector<Label> anchors;
  for (const Label& l : pseudo_labels) {
    if (!l.score) throw InputError("pseudo label (" + l.category + ") without score");
    if (*l.score > tau) anchors.push_back(l);
  }
  return anchors;
}

AugmentedFrame augment_unlabeled_frame(const Frame& frame, std::span<const Label> pseudo_labels,
                                       const SamplingSources& sources,
                                       const AugmentationConfig& cfg, std::size_t epoch,
                                       Rng& rng) {
  auto anchors = select_collision_anchors(pseudo_labels, cfg.tau_unlabeled_frame);
  const auto& st = cfg.strategies;
  if (fade_active(epoch, cfg) || !st.any_unlabeled()) {
    AugmentedFrame out{frame.cloud, {}, std::move(anchors), {}};
    seed_report_categories(out.report, cfg);
    return out;
  }
  std::vector<OrientedBox3D> occupied;
  occupied.reserve(anchors.size());
  for (const Label& l : anchors) occupied.push_back(l.box);

  AugmentedFrame out = run_pipeline(frame, occupied, sources, cfg, st.gt_on_unlabeled,
                                    Strategy::gt_on_unlabeled, st.pseudo_on_unlabeled,
                                    Strategy::pseudo_on_unlabeled, rng);
  seed_report_categories(out.report, cfg);
  out.collision_anchors = std::move(anchors);
  return out;
}

AugmentedFrame augment_unlabeled_frame(const Frame& frame, std::span<const Label> pseudo_labels,
                                       const SampleDatabase& gt_db,
                                       const SampleDatabase& pseudo_db,
                                       const AugmentationConfig& cfg, std::size_t epoch,
                                       Rng& rng) {
  const SamplingSources sources(gt_db, pseudo_db, cfg);
  return augment_unlabeled_frame(frame, pseudo_labels, sources, cfg, epoch, rng);
}

}  // namespace semisamp
