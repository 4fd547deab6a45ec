#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "semisamp/augmentor.hpp"
#include "semisamp/config.hpp"
#include "semisamp/error.hpp"
#include "semisamp/eval.hpp"
#include "semisamp/harness.hpp"
#include "semisamp/io.hpp"
#include "semisamp/parallel.hpp"
#include "semisamp/sample_db.hpp"
#include "semisamp/synthetic.hpp"

namespace fs = std::filesystem;

namespace semisamp::cli {
namespace {

using Json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "0.7" sets every known category; "car=0.8,cyclist=0.7" sets the named ones.
void apply_threshold_arg(const std::string& text, const std::vector<std::string>& categories,
                         ThresholdMap& thresholds) {
  if (text.find('=') == std::string::npos) {
    const double v = parse_real(text);
    for (auto& [k, old] : thresholds) old = v;
    for (const auto& c : categories) thresholds[c] = v;
    return;
  }
  for (const auto& item : split_list(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("expected category=value, got '" + item + "'");
    thresholds[item.substr(0, eq)] = parse_real(item.substr(eq + 1));
  }
}

void apply_samples_arg(const std::string& text, AugmentationConfig& cfg) {
  for (const auto& item : split_list(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("expected category=count, got '" + item + "'");
    const std::string cat = item.substr(0, eq);
    const std::size_t n = std::stoul(item.substr(eq + 1));
    auto it = std::find_if(cfg.samples_per_category.begin(), cfg.samples_per_category.end(),
                           [&](const CategoryQuota& q) { return q.category == cat; });
    if (it == cfg.samples_per_category.end()) {
      cfg.samples_per_category.push_back({cat, n});
    } else {
      it->samples = n;
    }
  }
}

StrategyFlags parse_strategies(const std::string& text) {
  StrategyFlags f{false, false, false, false};
  if (text == "none") return f;
  if (text == "all") return StrategyFlags{};
  for (const auto& name : split_list(text)) {
    if (name == "gt_on_labeled") {
      f.gt_on_labeled = true;
    } else if (name == "pseudo_on_labeled") {
      f.pseudo_on_labeled = true;
    } else if (name == "gt_on_unlabeled") {
      f.gt_on_unlabeled = true;
    } else if (name == "pseudo_on_unlabeled") {
      f.pseudo_on_unlabeled = true;
    } else {
      throw UsageError("unknown strategy '" + name + "'");
    }
  }
  return f;
}

// Flags shared by every subcommand that runs the augmentor.
struct AugmentFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string strategies;
  std::string samples;
  std::string tau_pseudo_sample;
  std::optional<double> tau_unlabeled_frame;
  std::string collision_mode;
  std::optional<std::size_t> fade_epoch;
  std::optional<bool> category_shuffle;
  std::optional<bool> remove_occluded_points;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "Run configuration file (JSON)");
    app.add_option("--seed", seed, "Root seed; overrides the configuration");
    app.add_option("--strategies", strategies,
                   "Comma list of gt_on_labeled, pseudo_on_labeled, gt_on_unlabeled, "
                   "pseudo_on_unlabeled, or all/none");
    app.add_option("--samples-per-category", samples, "category=count,...");
    app.add_option("--tau-pseudo-sample", tau_pseudo_sample, "value or category=value,...");
    app.add_option("--tau-unlabeled-frame", tau_unlabeled_frame);
    app.add_option("--collision-mode", collision_mode)->check(CLI::IsMember({"bev", "full3d"}));
    app.add_option("--fade-epoch", fade_epoch);
    app.add_option("--category-shuffle", category_shuffle);
    app.add_option("--remove-occluded-points", remove_occluded_points);
  }

  RunConfig resolve() const {
    RunConfig run = config.empty() ? RunConfig{} : load_run_config(config);
    AugmentationConfig& a = run.augmentation;
    if (seed) a.seed = *seed;
    if (!strategies.empty()) a.strategies = parse_strategies(strategies);
    if (!samples.empty()) apply_samples_arg(samples, a);
    if (!tau_pseudo_sample.empty()) apply_threshold_arg(tau_pseudo_sample, a.category_queue(), a.tau_pseudo_sample);
    if (tau_unlabeled_frame) a.tau_unlabeled_frame = *tau_unlabeled_frame;
    if (!collision_mode.empty()) a.collision_mode = parse_collision_mode(collision_mode);
    if (fade_epoch) a.fade_epoch = *fade_epoch;
    if (category_shuffle) a.category_shuffle = *category_shuffle;
    if (remove_occluded_points) a.remove_occluded_points = *remove_occluded_points;
    a.validate();
    run.simulation.augmentation = a;
    return run;
  }
};

std::vector<std::string> split_ids(const DatasetManifest& m, const std::string& split) {
  if (split == "labeled") return m.labeled;
  if (split == "unlabeled") return m.unlabeled;
  if (split == "eval") return m.eval;
  if (split == "all") {
    std::vector<std::string> ids = m.labeled;
    ids.insert(ids.end(), m.unlabeled.begin(), m.unlabeled.end());
    return ids;
  }
  throw UsageError("unknown split '" + split + "'");
}

std::vector<Frame> load_frames(const DatasetManifest& m, const std::vector<std::string>& ids,
                               std::size_t workers) {
  std::vector<Frame> frames(ids.size());
  parallel_for(ids.size(), workers,
               [&](std::size_t i) { frames[i] = load_frame(m.root, ids[i], m.channel_count); });
  return frames;
}

std::vector<Label> pseudo_labels_for(const fs::path& dir, const std::string& id) {
  const fs::path p = dir / (id + ".pseudo");
  return read_label_file(p).value_or(std::vector<Label>{});
}

Json counts_json(const std::array<std::size_t, kStrategyCount>& counts) {
  Json j = Json::object();
  for (std::size_t s = 0; s < kStrategyCount; ++s) {
    j[std::string(to_string(static_cast<Strategy>(s)))] = counts[s];
  }
  return j;
}

std::string report_json(const AugmentedFrame& a) {
  Json j;
  Json cats = Json::object();
  for (const auto& [cat, c] : a.report.per_category) {
    cats[cat] = {{"attempted", c.attempted}, {"accepted", c.accepted}};
  }
  j["per_category"] = cats;
  j["attempted_by_strategy"] = counts_json(a.report.attempted_by_strategy);
  j["accepted_by_strategy"] = counts_json(a.report.accepted_by_strategy);
  Json pasted = Json::array();
  for (const auto& p : a.report.pasted) {
    pasted.push_back({{"strategy", to_string(p.strategy)}, {"sample", p.sample}});
  }
  j["pasted"] = pasted;
  j["removed_points"] = a.report.removed_points;
  j["collision_anchors"] = a.collision_anchors.size();
  j["points"] = a.cloud.size();
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

int run_build_gt_db(const std::string& manifest_path, const std::string& out_dir,
                    const std::string& split, bool use_masks, std::size_t min_points,
                    std::size_t workers, std::ostream& out) {
  const DatasetManifest m = read_manifest(manifest_path);
  const auto frames = load_frames(m, split_ids(m, split), workers);
  GtBuildOptions opts;
  opts.categories = m.categories;
  opts.use_masks = use_masks;
  opts.min_points = min_points;
  opts.channel_count = m.channel_count;
  SampleDatabase db = build_gt_database(frames, opts);
  db.set_metadata("split", split);
  save_db(db, out_dir);
  out << format_db_stats(db_stats(db));
  return 0;
}

int run_build_pseudo_db(const std::string& manifest_path, const std::string& out_dir,
                        const std::string& split, const std::string& labels_dir, double min_score,
                        std::size_t min_points, std::size_t workers, std::ostream& out) {
  const DatasetManifest m = read_manifest(manifest_path);
  const auto ids = split_ids(m, split);
  const auto frames = load_frames(m, ids, workers);
  const fs::path dir = labels_dir.empty() ? m.root : fs::path(labels_dir);
  std::vector<std::vector<Label>> labels(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto l = read_label_file(dir / (ids[i] + ".pseudo"));
    if (!l) throw NotFoundError("no pseudo labels for frame '" + ids[i] + "' in " + dir.string());
    labels[i] = std::move(*l);
  }
  PseudoBuildOptions opts;
  opts.categories = m.categories;
  opts.min_score = min_score;
  opts.min_points = min_points;
  opts.channel_count = m.channel_count;
  SampleDatabase db = build_pseudo_database(frames, labels, opts);
  db.set_metadata("split", split);
  db.set_metadata("min_score", format_real(min_score));
  save_db(db, out_dir);
  out << format_db_stats(db_stats(db));
  return 0;
}

int run_db_stats(const std::string& db_dir, std::ostream& out) {
  out << format_db_stats(db_stats(load_db(db_dir)));
  return 0;
}

std::optional<SampleDatabase> load_optional_db(const std::string& dir, DatabaseKind kind,
                                               const DatasetManifest& m) {
  if (!dir.empty()) return load_db(dir);
  return SampleDatabase(kind, m.channel_count, m.categories);
}

int run_augment(const std::string& manifest_path, const std::string& gt_dir,
                const std::string& pseudo_dir, const std::string& frame_id,
                const std::string& split, const std::string& pseudo_labels_dir,
                std::size_t epoch, std::size_t workers, const std::string& out_dir,
                const AugmentFlags& flags, std::ostream& out) {
  if (frame_id.empty() == split.empty()) throw UsageError("give exactly one of --frame or --split");
  const DatasetManifest m = read_manifest(manifest_path);
  const RunConfig run = flags.resolve();
  const AugmentationConfig& cfg = run.augmentation;
  const auto gt_db = load_optional_db(gt_dir, DatabaseKind::gt, m);
  const auto pseudo_db = load_optional_db(pseudo_dir, DatabaseKind::pseudo, m);
  const SamplingSources sources(*gt_db, *pseudo_db, cfg);

  std::vector<std::string> ids;
  if (!frame_id.empty()) {
    ids.push_back(frame_id);
  } else {
    ids = split_ids(m, split);
  }
  auto is_labeled = [&](const std::string& id) {
    if (std::find(m.labeled.begin(), m.labeled.end(), id) != m.labeled.end()) return true;
    if (std::find(m.unlabeled.begin(), m.unlabeled.end(), id) != m.unlabeled.end()) return false;
    throw InputError("frame '" + id + "' is in neither the labeled nor the unlabeled split");
  };
  std::vector<char> labeled(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) labeled[i] = is_labeled(ids[i]);

  const fs::path out_root(out_dir);
  fs::create_directories(out_root);
  const fs::path pl_dir = pseudo_labels_dir.empty() ? m.root : fs::path(pseudo_labels_dir);

  std::vector<std::string> summary(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const Frame frame = load_frame(m.root, ids[i], m.channel_count);
    Rng rng = frame_stream(cfg.seed, ids[i], epoch, "augment");
    AugmentedFrame result;
    if (labeled[i]) {
      result = augment_labeled_frame(frame, sources, cfg, epoch, rng);
    } else {
      const auto pl = pseudo_labels_for(pl_dir, ids[i]);
      result = augment_unlabeled_frame(frame, pl, sources, cfg, epoch, rng);
    }
    write_file_bytes(out_root / (ids[i] + ".bin"), write_points_bin(result.cloud));
    write_text_file(out_root / (ids[i] + ".labels"), write_labels(result.supervising_labels));
    std::vector<Label> pasted;
    for (const auto& p : result.report.pasted) pasted.push_back(p.label);
    write_text_file(out_root / (ids[i] + ".pasted"), write_labels(pasted));
    write_text_file(out_root / (ids[i] + ".report.json"), report_json(result));
    summary[i] = ids[i] + (labeled[i] ? " labeled" : " unlabeled") + " accepted " +
                 std::to_string(result.report.total_accepted()) + " removed " +
                 std::to_string(result.report.removed_points) + " points " +
                 std::to_string(result.cloud.size()) + "\n";
  });
  for (const auto& line : summary) out << line;
  return 0;
}

int run_simulate(const std::string& manifest_path, const std::optional<std::size_t>& epochs,
                 const std::string& pseudo_threshold, std::size_t workers,
                 const std::string& metrics_path, const AugmentFlags& flags, std::ostream& out) {
  const DatasetManifest m = read_manifest(manifest_path);
  RunConfig run = flags.resolve();
  SimulationConfig& sim = run.simulation;
  if (epochs) sim.epochs = *epochs;
  if (!pseudo_threshold.empty()) {
    if (pseudo_threshold.find('=') == std::string::npos) {
      sim.pseudo_score_threshold.clear();
      sim.default_pseudo_score_threshold = parse_real(pseudo_threshold);
    } else {
      apply_threshold_arg(pseudo_threshold, {}, sim.pseudo_score_threshold);
    }
  }
  sim.workers = workers;
  const SimDataset data = load_sim_dataset(m);

  std::ofstream file;
  std::ostream* sink = &out;
  if (!metrics_path.empty()) {
    file.open(metrics_path, std::ios::binary | std::ios::trunc);
    if (!file) throw NotFoundError("cannot open metrics file " + metrics_path);
    sink = &file;
  }
  run_simulation(sim, data, run.augmentation.seed, [&](const EpochMetrics& e) {
    *sink << to_json_line(e);
    sink->flush();
  });
  return 0;
}

int run_eval(const std::string& gt_dir, const std::string& pred_dir, const std::string& frames,
             const std::string& iou, std::optional<double> default_iou,
             std::size_t recall_positions, std::ostream& out) {
  std::vector<std::string> ids = split_list(frames);
  if (ids.empty()) {
    if (!fs::is_directory(gt_dir)) throw NotFoundError("no such directory: " + gt_dir);
    for (const auto& e : fs::directory_iterator(gt_dir)) {
      if (e.path().extension() == ".labels") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
  }
  std::vector<std::vector<Label>> gts, preds;
  for (const auto& id : ids) {
    auto g = read_label_file(fs::path(gt_dir) / (id + ".labels"));
    if (!g) throw NotFoundError("no groundtruth labels for frame '" + id + "'");
    std::vector<Label> truth;
    for (auto& l : *g) {
      if (l.source == LabelSource::groundtruth) truth.push_back(std::move(l));
    }
    gts.push_back(std::move(truth));
    preds.push_back(read_label_file(fs::path(pred_dir) / (id + ".labels")).value_or(std::vector<Label>{}));
  }
  EvalOptions opts = SimulationConfig{}.evaluation;
  opts.recall_positions = recall_positions;
  if (default_iou) opts.default_iou = *default_iou;
  if (!iou.empty()) {
    if (iou.find('=') == std::string::npos) {
      opts.iou_threshold.clear();
      opts.default_iou = parse_real(iou);
    } else {
      apply_threshold_arg(iou, {}, opts.iou_threshold);
    }
  }
  const ApResult r = evaluate_ap(preds, gts, opts);
  for (const auto& [cat, ap] : r.ap) {
    out << "AP " << cat << " " << format_real(ap) << " groundtruth " << r.num_groundtruth.at(cat)
        << "\n";
  }
  out << "mAP " << format_real(r.map) << "\n";
  return 0;
}

int run_make_synthetic(const std::string& out_dir, const SyntheticDatasetSpec& spec,
                       std::optional<double> pseudo_skill, std::ostream& out) {
  const DatasetManifest m = write_synthetic_dataset(out_dir, spec);
  if (pseudo_skill) {
    // Teacher-like pseudo labels for the unlabeled split, for build-pseudo-db.
    NoiseModel noise;
    noise.categories = spec.scene.categories;
    noise.nominal_size = spec.scene.nominal_size;
    noise.x_min = spec.scene.x_min;
    noise.x_max = spec.scene.x_max;
    noise.y_min = spec.scene.y_min;
    noise.y_max = spec.scene.y_max;
    for (const auto& id : m.unlabeled) {
      const auto truth = read_label_file(frame_paths(m.root, id).truth).value_or(std::vector<Label>{});
      Rng rng = frame_stream(spec.seed, id, 0, "detect");
      write_label_file(frame_paths(m.root, id).pseudo, synthetic_detect(truth, noise, *pseudo_skill, rng));
    }
  }
  out << "labeled " << m.labeled.size() << " unlabeled " << m.unlabeled.size() << " eval "
      << m.eval.size() << "\n";
  return 0;
}

void print_bench(const BenchResult& r, std::ostream& out) {
  out << "augmentations " << r.augmentations << " seconds " << r.seconds << " accepted "
      << r.accepted << " rate " << r.per_second() << "/s\n";
}

int run_bench_split(const std::string& manifest_path, const std::string& gt_dir,
                    const std::string& pseudo_dir, const std::string& split,
                    std::size_t iterations, std::size_t workers, const AugmentFlags& flags,
                    std::ostream& out) {
  const DatasetManifest m = read_manifest(manifest_path);
  const RunConfig run = flags.resolve();
  const AugmentationConfig& cfg = run.augmentation;
  const auto gt_db = load_optional_db(gt_dir, DatabaseKind::gt, m);
  const auto pseudo_db = load_optional_db(pseudo_dir, DatabaseKind::pseudo, m);
  const SamplingSources sources(*gt_db, *pseudo_db, cfg);
  const auto ids = split_ids(m, split);
  if (ids.empty()) throw InputError("split '" + split + "' is empty");
  const auto frames = load_frames(m, ids, workers);
  std::vector<std::vector<Label>> pseudo(ids.size());
  std::vector<char> labeled(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    labeled[i] = std::find(m.labeled.begin(), m.labeled.end(), ids[i]) != m.labeled.end();
    if (!labeled[i]) pseudo[i] = pseudo_labels_for(m.root, ids[i]);
  }
  std::vector<std::size_t> accepted(iterations);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(iterations, workers, [&](std::size_t it) {
    const std::size_t i = it % frames.size();
    Rng rng = frame_stream(cfg.seed, ids[i], it, "augment");
    const AugmentedFrame a =
        labeled[i] ? augment_labeled_frame(frames[i], sources, cfg, 0, rng)
                   : augment_unlabeled_frame(frames[i], pseudo[i], sources, cfg, 0, rng);
    accepted[it] = a.report.total_accepted();
  });
  const auto t1 = std::chrono::steady_clock::now();
  BenchResult r;
  r.augmentations = iterations;
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  for (auto a : accepted) r.accepted += a;
  print_bench(r, out);
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Semi-sampling augmentation for 3D detection", "semisamp"};
  app.require_subcommand(1);

  std::size_t workers = 1;
  auto add_workers = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  // build-gt-db
  auto* gt = app.add_subcommand("build-gt-db", "Crop groundtruth objects into a sample database");
  std::string manifest, out_path, gt_split, pd_split, au_split, be_split;
  bool use_masks = false;
  std::size_t min_points = kDefaultMinPoints;
  gt->add_option("--manifest", manifest, "Dataset manifest or directory")->required();
  gt->add_option("--out", out_path, "Database directory")->required();
  gt->add_option("--split", gt_split, "labeled, unlabeled, eval or all")->default_val("labeled");
  gt->add_option("--use-masks", use_masks, "Crop by instance masks instead of boxes");
  gt->add_option("--min-points", min_points);
  add_workers(gt);

  // build-pseudo-db
  auto* pd = app.add_subcommand("build-pseudo-db", "Crop pseudo-labeled objects into a sample database");
  std::string labels_dir;
  double min_score = 0.0;
  pd->add_option("--manifest", manifest)->required();
  pd->add_option("--out", out_path)->required();
  pd->add_option("--split", pd_split)->default_val("unlabeled");
  pd->add_option("--pseudo-labels", labels_dir, "Directory of <frame>.pseudo files (default: dataset root)");
  pd->add_option("--min-score", min_score);
  pd->add_option("--min-points", min_points);
  add_workers(pd);

  // db-stats
  auto* st = app.add_subcommand("db-stats", "Summarize a sample database");
  std::string db_dir;
  st->add_option("--db", db_dir)->required();

  // augment
  auto* au = app.add_subcommand("augment", "Augment one frame or a whole split");
  AugmentFlags aug_flags;
  std::string gt_db, pseudo_db, frame_id;
  std::size_t epoch = 0;
  au->add_option("--manifest", manifest)->required();
  au->add_option("--gt-db", gt_db, "Groundtruth sample database");
  au->add_option("--pseudo-db", pseudo_db, "Pseudo sample database");
  au->add_option("--frame", frame_id);
  au->add_option("--split", au_split, "labeled, unlabeled or all")->check(CLI::IsMember({"labeled", "unlabeled", "all"}));
  au->add_option("--pseudo-labels", labels_dir, "Directory of <frame>.pseudo files (default: dataset root)");
  au->add_option("--epoch", epoch);
  au->add_option("--out", out_path)->required();
  aug_flags.add_to(*au);
  add_workers(au);

  // simulate
  auto* si = app.add_subcommand("simulate", "Run the mean-teacher simulation");
  std::optional<std::size_t> epochs;
  std::string pseudo_threshold;
  si->add_option("--manifest", manifest)->required();
  si->add_option("--out", out_path, "Metrics file (JSON lines); stdout when absent");
  si->add_option("--epochs", epochs);
  si->add_option("--pseudo-score-threshold", pseudo_threshold, "value or category=value,...");
  aug_flags.add_to(*si);
  add_workers(si);

  // eval
  auto* ev = app.add_subcommand("eval", "Average precision of predictions against groundtruth");
  std::string gt_dir, pred_dir, frames, iou;
  std::optional<double> default_iou;
  std::size_t recall_positions = kDefaultRecallPositions;
  ev->add_option("--gt", gt_dir, "Directory of <frame>.labels groundtruth")->required();
  ev->add_option("--pred", pred_dir, "Directory of <frame>.labels predictions")->required();
  ev->add_option("--frames", frames, "Comma list of frame ids (default: every groundtruth file)");
  ev->add_option("--iou", iou, "value or category=value,...");
  ev->add_option("--default-iou", default_iou);
  ev->add_option("--recall-positions", recall_positions)->check(CLI::PositiveNumber);

  // bench
  auto* be = app.add_subcommand("bench", "Augmentation throughput");
  SyntheticBenchOptions bench;
  be->add_option("--manifest", manifest, "Benchmark a split instead of synthetic frames");
  be->add_option("--gt-db", gt_db);
  be->add_option("--pseudo-db", pseudo_db);
  be->add_option("--split", be_split)->default_val("labeled");
  be->add_option("--iterations", bench.iterations);
  be->add_option("--points", bench.points_per_frame, "Synthetic frame size");
  be->add_option("--candidates", bench.candidates, "Synthetic samples drawn per frame");
  be->add_option("--frames", bench.frames, "Distinct synthetic frames");
  aug_flags.add_to(*be);
  add_workers(be);

  // make-synthetic
  auto* ms = app.add_subcommand("make-synthetic", "Write a generated dataset");
  SyntheticDatasetSpec spec;
  std::optional<double> pseudo_skill = 0.5;
  ms->add_option("--out", out_path)->required();
  ms->add_option("--labeled", spec.labeled);
  ms->add_option("--unlabeled", spec.unlabeled);
  ms->add_option("--eval", spec.eval);
  ms->add_option("--seed", spec.seed);
  ms->add_option("--background-points", spec.scene.background_points);
  ms->add_option("--points-per-object", spec.scene.points_per_object);
  ms->add_option("--pseudo-skill", pseudo_skill, "Teacher skill for generated .pseudo files");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, out);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, out);
  }

  if (gt->parsed()) return run_build_gt_db(manifest, out_path, gt_split, use_masks, min_points, workers, out);
  if (pd->parsed()) {
    return run_build_pseudo_db(manifest, out_path, pd_split, labels_dir, min_score, min_points, workers, out);
  }
  if (st->parsed()) return run_db_stats(db_dir, out);
  if (au->parsed()) {
    return run_augment(manifest, gt_db, pseudo_db, frame_id, au_split, labels_dir, epoch, workers,
                       out_path, aug_flags, out);
  }
  if (si->parsed()) return run_simulate(manifest, epochs, pseudo_threshold, workers, out_path, aug_flags, out);
  if (ev->parsed()) return run_eval(gt_dir, pred_dir, frames, iou, default_iou, recall_positions, out);
  if (be->parsed()) {
    if (!manifest.empty()) {
      return run_bench_split(manifest, gt_db, pseudo_db, be_split, bench.iterations, workers, aug_flags, out);
    }
    bench.workers = workers;
    if (aug_flags.seed) bench.seed = *aug_flags.seed;
    print_bench(bench_synthetic(bench), out);
    return 0;
  }
  if (ms->parsed()) return run_make_synthetic(out_path, spec, pseudo_skill, out);
  throw UsageError("no subcommand");
}

}  // namespace

BenchResult bench_synthetic(const SyntheticBenchOptions& options) {
  if (options.frames == 0 || options.iterations == 0) throw InputError("bench needs frames and iterations");
  SceneSpec scene;
  Rng rng(options.seed);

  // Database from small scenes; benchmark frames carry the full point budget.
  SceneSpec source = scene;
  source.background_points = 200;
  std::vector<Frame> sources;
  for (std::size_t i = 0; i < 64; ++i) {
    sources.push_back(generate_scene(source, "s" + std::to_string(i), rng));
  }
  GtBuildOptions gopts;
  gopts.categories = scene.categories;
  const SampleDatabase gt_db = build_gt_database(sources, gopts);
  const SampleDatabase pseudo_db(DatabaseKind::pseudo, scene.channel_count, scene.categories);

  scene.background_points = options.points_per_frame;
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < options.frames; ++i) {
    Frame f = generate_scene(scene, "b" + std::to_string(i), rng);
    // Trim to the exact point budget.
    if (f.cloud.size() > options.points_per_frame) {
      std::vector<std::size_t> rows(options.points_per_frame);
      for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
      f.cloud = select_rows(f.cloud, rows);
    }
    frames.push_back(std::move(f));
  }

  AugmentationConfig cfg;
  cfg.strategies = {true, false, false, false};
  cfg.seed = options.seed;
  for (std::size_t i = 0; i < scene.categories.size(); ++i) {
    const std::size_t n = options.candidates / scene.categories.size() +
                          (i < options.candidates % scene.categories.size() ? 1 : 0);
    cfg.samples_per_category.push_back({scene.categories[i], n});
    cfg.tau_pseudo_sample[scene.categories[i]] = 0.5;
  }
  const SamplingSources src(gt_db, pseudo_db, cfg);

  std::vector<std::size_t> accepted(options.iterations), points(options.iterations);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(options.iterations, options.workers, [&](std::size_t it) {
    const Frame& f = frames[it % frames.size()];
    Rng r = frame_stream(cfg.seed, f.frame_id, it, "augment");
    const AugmentedFrame a = augment_labeled_frame(f, src, cfg, 0, r);
    accepted[it] = a.report.total_accepted();
    points[it] = a.cloud.size();
  });
  const auto t1 = std::chrono::steady_clock::now();

  BenchResult result;
  result.augmentations = options.iterations;
  result.seconds = std::chrono::duration<double>(t1 - t0).count();
  for (std::size_t i = 0; i < options.iterations; ++i) {
    result.accepted += accepted[i];
    result.output_points += points[i];
  }
  return result;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(args, out);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace semisamp::cli
