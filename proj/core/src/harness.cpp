#include "semisamp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "semisamp/error.hpp"
#include "semisamp/parallel.hpp"
#include "semisamp/sample_db.hpp"

namespace semisamp {

namespace {

constexpr double kSkillFloor = 1e-6;

double logit(double p) {
  p = std::clamp(p, kSkillFloor, 1.0 - kSkillFloor);
  return std::log(p / (1.0 - p));
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// New student skill from one epoch of supervision. Positive net signal
// moves skill toward 1, negative toward 0; the step is bounded by
// learning_rate.
double improved_skill(double skill, double correct, double wrong, double frames, double rate) {
  const double net = frames > 0.0 ? (correct - wrong) / frames : 0.0;
  const double gain = rate * net / (1.0 + std::abs(net));
  const double next = gain >= 0.0 ? skill + gain * (1.0 - skill) : skill + gain * skill;
  return std::clamp(next, kSkillFloor, 1.0 - kSkillFloor);
}

bool overlaps_any(const OrientedBox3D& box, std::span<const Label> labels) {
  return std::any_of(labels.begin(), labels.end(),
                     [&](const Label& l) { return bev_overlap(box, l.box); });
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

}  // namespace

double ModelState::skill() const {
  if (params.empty()) return 0.5;
  const double mean = std::accumulate(params.begin(), params.end(), 0.0) /
                      static_cast<double>(params.size());
  return 1.0 / (1.0 + std::exp(-mean));
}

ModelState ModelState::with_skill(std::size_t count, double skill) {
  return {std::vector<double>(count, logit(skill))};
}

ModelState ema_update(const ModelState& teacher, const ModelState& student, double alpha) {
  if (teacher.params.size() != student.params.size()) {
    throw InputError("teacher and student parameter counts differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("ema alpha outside [0, 1]");
  ModelState out{teacher.params};
  for (std::size_t i = 0; i < out.params.size(); ++i) {
    out.params[i] = alpha * teacher.params[i] + (1.0 - alpha) * student.params[i];
  }
  return out;
}

void NoiseModel::validate() const {
  for (double v : {center_sigma, size_sigma, yaw_sigma, drop_rate, fp_rate, score.spread}) {
    if (!(v >= 0.0)) throw InputError("noise model rates and sigmas must be non-negative");
  }
  if (drop_rate > 1.0) throw InputError("drop_rate above 1");
  if (fp_rate > 0.0 && categories.empty()) throw InputError("false positives need categories");
  if (!(x_max > x_min && y_max > y_min)) throw InputError("empty false-positive region");
}

std::vector<Label> synthetic_detect(std::span<const Label> groundtruth, const NoiseModel& noise,
                                    double skill, Rng& rng) {
  const double k = 1.0 - std::clamp(skill, 0.0, 1.0);
  const ScoreModel& sm = noise.score;
  std::vector<Label> out;
  out.reserve(groundtruth.size());
  for (const Label& g : groundtruth) {
    if (rng.bernoulli(noise.drop_rate * k)) continue;
    const Vec3& c = g.box.center();
    const Vec3& s = g.box.size();
    const Vec3 dc{rng.normal() * noise.center_sigma * k, rng.normal() * noise.center_sigma * k,
                  rng.normal() * noise.center_sigma * k};
    const Vec3 ds{rng.normal() * noise.size_sigma * k, rng.normal() * noise.size_sigma * k,
                  rng.normal() * noise.size_sigma * k};
    const double dyaw = rng.normal() * noise.yaw_sigma * k;
    const double mag = std::sqrt(dc.x * dc.x + dc.y * dc.y + dc.z * dc.z) +
                       std::sqrt(ds.x * ds.x + ds.y * ds.y + ds.z * ds.z) + std::abs(dyaw);
    const double score = clamp01(sm.tp_mean - sm.perturbation_penalty * mag + sm.spread * rng.normal());
    auto grow = [](double v, double d) { return std::max(0.05, v + d); };
    Label det;
    det.category = g.category;
    det.box = OrientedBox3D({c.x + dc.x, c.y + dc.y, c.z + dc.z},
                            {grow(s.x, ds.x), grow(s.y, ds.y), grow(s.z, ds.z)}, g.box.yaw() + dyaw);
    det.score = score;
    det.source = LabelSource::pseudo;
    out.push_back(std::move(det));
  }
  const std::uint64_t fps = rng.poisson(noise.fp_rate);
  for (std::uint64_t i = 0; i < fps; ++i) {
    const auto& category = noise.categories[rng.below(noise.categories.size())];
    const auto it = noise.nominal_size.find(category);
    const Vec3 size = it != noise.nominal_size.end() ? it->second : Vec3{1.0, 1.0, 1.0};
    const Vec3 center{rng.uniform(noise.x_min, noise.x_max), rng.uniform(noise.y_min, noise.y_max),
                      0.5 * size.z};
    const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double score = clamp01(sm.fp_mean + sm.spread * rng.normal());
    out.push_back({category, OrientedBox3D(center, size, yaw), score, LabelSource::pseudo});
  }
  return out;
}

std::vector<Label> filter_pseudo_labels(std::span<const Label> detections,
                                        const ThresholdMap& thresholds) {
  std::vector<Label> kept;
  for (const Label& d : detections) {
    const auto it = thresholds.find(d.category);
    if (it == thresholds.end()) {
      throw InputError("no pseudo-label threshold for category '" + d.category + "'");
    }
    if (d.effective_score() > it->second) kept.push_back(d);
  }
  return kept;
}

double MatchCounts::precision() const {
  return predictions == 0 ? 1.0
                          : static_cast<double>(true_positives) / static_cast<double>(predictions);
}

double MatchCounts::recall() const {
  return groundtruth == 0 ? 1.0
                          : static_cast<double>(true_positives) / static_cast<double>(groundtruth);
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
  true_positives += o.true_positives;
  predictions += o.predictions;
  groundtruth += o.groundtruth;
  return *this;
}

MatchCounts match_predictions(std::span<const Label> predictions, std::span<const Label> truth,
                              const EvalOptions& iou, std::vector<bool>* is_tp) {
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].effective_score() > predictions[b].effective_score();
  });
  std::vector<bool> used(truth.size(), false);
  if (is_tp) is_tp->assign(predictions.size(), false);
  MatchCounts counts{0, predictions.size(), truth.size()};
  for (std::size_t i : order) {
    const Label& p = predictions[i];
    const double thr = iou.threshold_for(p.category);
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (used[j] || truth[j].category != p.category) continue;
      const double v = iou_3d(p.box, truth[j].box);
      if (v >= thr && v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best >= 0.0) {
      used[best_j] = true;
      ++counts.true_positives;
      if (is_tp) (*is_tp)[i] = true;
    }
  }
  return counts;
}

double SimulationConfig::pseudo_threshold_for(const std::string& category) const {
  const auto it = pseudo_score_threshold.find(category);
  return it != pseudo_score_threshold.end() ? it->second : default_pseudo_score_threshold;
}

ThresholdMap SimulationConfig::pseudo_thresholds() const {
  ThresholdMap out = pseudo_score_threshold;
  for (const auto& c : noise.categories) out.emplace(c, default_pseudo_score_threshold);
  for (const auto& q : augmentation.samples_per_category) {
    out.emplace(q.category, default_pseudo_score_threshold);
  }
  return out;
}

void SimulationConfig::validate() const {
  if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) throw InputError("ema_alpha outside [0, 1]");
  if (evaluation.recall_positions == 0) throw InputError("recall positions must be at least 1");
  if (param_count == 0) throw InputError("param_count must be positive");
  for (const auto& [c, t] : pseudo_thresholds()) {
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("pseudo threshold for '" + c + "' outside [0, 1]");
  }
  if (pseudo_db_rebuild_interval && *pseudo_db_rebuild_interval == 0) {
    throw InputError("pseudo_db_rebuild_interval must be positive");
  }
  augmentation.validate();
  noise.validate();
}

SimDataset load_sim_dataset(const DatasetManifest& manifest) {
  SimDataset data;
  data.categories = manifest.categories;
  const std::size_t ch = manifest.channel_count;
  for (const auto& id : manifest.labeled) {
    data.labeled.push_back(load_frame(manifest.root, id, ch));
  }
  for (const auto& id : manifest.unlabeled) {
    SimFrame sf{load_frame(manifest.root, id, ch), {}};
    for (const Label& l : sf.frame.labels) {
      if (l.source == LabelSource::groundtruth) {
        throw FormatError("unlabeled frame '" + id + "' carries groundtruth labels");
      }
    }
    const auto truth = read_label_file(frame_paths(manifest.root, id).truth);
    if (!truth) throw NotFoundError("unlabeled frame '" + id + "' has no .truth file");
    sf.truth = *truth;
    data.unlabeled.push_back(std::move(sf));
  }
  for (const auto& id : manifest.eval) {
    SimFrame sf{load_frame(manifest.root, id, ch), {}};
    if (!sf.frame.labels.empty()) {
      sf.truth = std::move(sf.frame.labels);
      sf.frame.labels.clear();
    } else if (const auto truth = read_label_file(frame_paths(manifest.root, id).truth)) {
      sf.truth = *truth;
    } else {
      throw NotFoundError("eval frame '" + id + "' has no annotations");
    }
    sf.frame.instance_masks.reset();
    data.eval.push_back(std::move(sf));
  }
  return data;
}

std::size_t EpochMetrics::total_pasted() const {
  return std::accumulate(pasted.begin(), pasted.end(), std::size_t{0});
}

std::string to_json_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["batches"] = m.batches;
  j["fade_active"] = m.fade_active;
  j["raw_detections"] = m.raw_detections;
  j["pseudo_labels"] = m.pseudo_labels;
  j["pseudo_precision"] = m.pseudo_precision;
  j["pseudo_recall"] = m.pseudo_recall;
  j["collision_anchors"] = m.collision_anchors;
  nlohmann::ordered_json pasted;
  for (std::size_t s = 0; s < kStrategyCount; ++s) {
    pasted[std::string(to_string(static_cast<Strategy>(s)))] = m.pasted[s];
  }
  j["pasted"] = pasted;
  j["correct_signals"] = m.correct_signals;
  j["wrong_signals"] = m.wrong_signals;
  j["teacher_skill"] = m.teacher_skill;
  j["student_skill"] = m.student_skill;
  j["map"] = m.map;
  nlohmann::ordered_json ap = nlohmann::ordered_json::object();
  for (const auto& [c, v] : m.ap) ap[c] = v;
  j["ap"] = ap;
  j["gt_db_samples"] = m.gt_db_samples;
  j["pseudo_db_samples"] = m.pseudo_db_samples;
  return j.dump() + "\n";
}

std::vector<EpochMetrics> run_simulation(const SimulationConfig& cfg, const SimDataset& data,
                                         std::uint64_t seed, const EpochSink& sink) {
  cfg.validate();
  if (data.labeled.empty()) throw InputError("simulation needs at least one labeled frame");
  if (data.unlabeled.empty()) throw InputError("simulation needs at least one unlabeled frame");
  const std::vector<SimFrame>& eval_split = data.eval.empty() ? data.unlabeled : data.eval;
  const AugmentationConfig& aug = cfg.augmentation;
  const ThresholdMap pseudo_thr = cfg.pseudo_thresholds();
  const std::size_t nl = data.labeled.size();
  const std::size_t nu = data.unlabeled.size();

  ModelState student = ModelState::with_skill(cfg.param_count, cfg.initial_skill);
  ModelState teacher = student;

  GtBuildOptions gt_opts;
  gt_opts.categories = data.categories;
  gt_opts.min_points = cfg.min_points;
  gt_opts.channel_count = data.labeled.front().cloud.channel_count();
  const SampleDatabase gt_db = build_gt_database(data.labeled, gt_opts);

  std::vector<Frame> unlabeled_frames;
  unlabeled_frames.reserve(nu);
  for (const SimFrame& sf : data.unlabeled) unlabeled_frames.push_back(sf.frame);

  std::optional<SampleDatabase> pseudo_db;
  std::vector<bool> pseudo_sample_tp;
  std::optional<SamplingSources> sources;

  std::vector<EpochMetrics> timeline;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double teacher_skill = teacher.skill();
    EpochMetrics m;
    m.epoch = epoch;
    m.batches = std::max(ceil_div(nl, cfg.labeled_batch), ceil_div(nu, cfg.unlabeled_batch));
    m.fade_active = fade_active(epoch, aug);

    std::vector<std::vector<Label>> raw(nu), kept(nu);
    std::vector<MatchCounts> quality(nu);
    std::vector<std::size_t> kept_tp(nu);
    parallel_for(nu, cfg.workers, [&](std::size_t i) {
      const SimFrame& sf = data.unlabeled[i];
      Rng rng = frame_stream(seed, sf.frame.frame_id, epoch, "detect");
      raw[i] = synthetic_detect(sf.truth, cfg.noise, teacher_skill, rng);
      kept[i] = filter_pseudo_labels(raw[i], pseudo_thr);
      quality[i] = match_predictions(kept[i], sf.truth, cfg.evaluation);
    });

    const bool rebuild = !pseudo_db || (cfg.pseudo_db_rebuild_interval &&
                                        epoch % *cfg.pseudo_db_rebuild_interval == 0);
    if (rebuild) {
      PseudoBuildOptions opts;
      opts.categories = data.categories;
      opts.min_score = cfg.pseudo_db_min_score;
      opts.min_points = cfg.min_points;
      opts.channel_count = gt_db.channel_count();
      sources.reset();
      pseudo_db = build_pseudo_database(unlabeled_frames, raw, opts);
      pseudo_sample_tp.assign(pseudo_db->size(), false);
      std::map<std::string_view, const SimFrame*> by_id;
      for (const SimFrame& sf : data.unlabeled) by_id[sf.frame.frame_id] = &sf;
      for (SampleId id = 0; id < pseudo_db->size(); ++id) {
        const SampleRecord& r = pseudo_db->record(id);
        const SimFrame* src = by_id.at(r.source_frame);
        const double thr = cfg.evaluation.threshold_for(r.category);
        pseudo_sample_tp[id] =
            std::any_of(src->truth.begin(), src->truth.end(), [&](const Label& t) {
              return t.category == r.category && iou_3d(t.box, r.box) >= thr;
            });
      }
      sources.emplace(gt_db, *pseudo_db, aug);
    }

    struct FrameOutcome {
      std::size_t correct = 0;
      std::size_t wrong = 0;
      std::size_t anchors = 0;
      std::array<std::size_t, kStrategyCount> pasted{};
    };
    std::vector<FrameOutcome> lab(nl), unl(nu);
    parallel_for(nl + nu, cfg.workers, [&](std::size_t t) {
      if (t < nl) {
        const Frame& f = data.labeled[t];
        Rng rng = frame_stream(seed, f.frame_id, epoch, "augment");
        const AugmentedFrame out = augment_labeled_frame(f, *sources, aug, epoch, rng);
        FrameOutcome& o = lab[t];
        o.correct = f.labels.size();
        for (const PastedSample& p : out.report.pasted) {
          if (p.strategy == Strategy::pseudo_on_labeled && !pseudo_sample_tp[p.sample]) {
            ++o.wrong;
          } else {
            ++o.correct;
          }
        }
        o.pasted = out.report.accepted_by_strategy;
        return;
      }
      const std::size_t i = t - nl;
      const SimFrame& sf = data.unlabeled[i];
      Rng rng = frame_stream(seed, sf.frame.frame_id, epoch, "augment");
      const AugmentedFrame out = augment_unlabeled_frame(sf.frame, raw[i], *sources, aug, epoch, rng);
      FrameOutcome& o = unl[i];
      o.correct = quality[i].true_positives;
      o.wrong = quality[i].predictions - quality[i].true_positives;
      // A paste landing on an object no anchor protected corrupts it.
      for (const PastedSample& p : out.report.pasted) {
        if (overlaps_any(p.label.box, sf.truth)) ++o.wrong;
      }
      o.anchors = out.collision_anchors.size();
      o.pasted = out.report.accepted_by_strategy;
    });

    MatchCounts q;
    for (std::size_t i = 0; i < nu; ++i) {
      q += quality[i];
      m.raw_detections += raw[i].size();
      m.pseudo_labels += kept[i].size();
    }
    for (const auto* group : {&lab, &unl}) {
      for (const FrameOutcome& o : *group) {
        m.correct_signals += o.correct;
        m.wrong_signals += o.wrong;
        m.collision_anchors += o.anchors;
        for (std::size_t s = 0; s < kStrategyCount; ++s) m.pasted[s] += o.pasted[s];
      }
    }
    m.pseudo_precision = q.precision();
    m.pseudo_recall = q.recall();

    const double before = student.skill();
    const double after =
        improved_skill(before, static_cast<double>(m.correct_signals),
                       static_cast<double>(m.wrong_signals), static_cast<double>(nl + nu),
                       cfg.learning_rate);
    const double shift = logit(after) - logit(before);
    for (double& p : student.params) p += shift;
    teacher = ema_update(teacher, student, cfg.ema_alpha);
    m.teacher_skill = teacher.skill();
    m.student_skill = student.skill();

    std::vector<std::vector<Label>> preds(eval_split.size()), truths(eval_split.size());
    parallel_for(eval_split.size(), cfg.workers, [&](std::size_t i) {
      const SimFrame& sf = eval_split[i];
      Rng rng = frame_stream(seed, sf.frame.frame_id, epoch, "eval");
      preds[i] = synthetic_detect(sf.truth, cfg.noise, m.teacher_skill, rng);
      truths[i] = sf.truth;
    });
    const ApResult ap = evaluate_ap(preds, truths, cfg.evaluation);
    m.map = ap.map;
    m.ap = ap.ap;
    m.gt_db_samples = gt_db.size();
    m.pseudo_db_samples = pseudo_db->size();

    if (sink) sink(m);
    timeline.push_back(std::move(m));
  }
  return timeline;
}

}  // namespace semisamp
