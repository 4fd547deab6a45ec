#include "semisamp/config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "semisamp/error.hpp"
#include "semisamp/io.hpp"

namespace semisamp {

namespace {

using Json = nlohmann::ordered_json;

void reject_unknown(const Json& obj, std::string_view section,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw FormatError(std::string(section) + ": expected an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) {
      throw FormatError(std::string(section) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

ThresholdMap read_thresholds(const Json& j) {
  ThresholdMap out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<double>();
  return out;
}

Json thresholds_json(const ThresholdMap& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

void parse_augmentation(const Json& j, AugmentationConfig& a) {
  reject_unknown(j, "augmentation",
                 {"strategies", "samples_per_category", "tau_pseudo_sample", "tau_unlabeled_frame",
                  "collision_mode", "category_shuffle", "fade_epoch", "remove_occluded_points",
                  "seed"});
  if (j.contains("strategies")) {
    const Json& s = j.at("strategies");
    reject_unknown(s, "augmentation.strategies",
                   {"gt_on_labeled", "pseudo_on_labeled", "gt_on_unlabeled", "pseudo_on_unlabeled"});
    read(s, "gt_on_labeled", a.strategies.gt_on_labeled);
    read(s, "pseudo_on_labeled", a.strategies.pseudo_on_labeled);
    read(s, "gt_on_unlabeled", a.strategies.gt_on_unlabeled);
    read(s, "pseudo_on_unlabeled", a.strategies.pseudo_on_unlabeled);
  }
  if (j.contains("samples_per_category")) {
    a.samples_per_category.clear();
    for (const auto& [k, v] : j.at("samples_per_category").items()) {
      const auto n = v.get<long long>();
      if (n < 0) throw FormatError("samples_per_category." + k + " is negative");
      a.samples_per_category.push_back({k, static_cast<std::size_t>(n)});
    }
  }
  if (j.contains("tau_pseudo_sample")) {
    const Json& t = j.at("tau_pseudo_sample");
    if (t.is_number()) {
      const double v = t.get<double>();
      for (auto& [k, old] : a.tau_pseudo_sample) old = v;
      for (const auto& q : a.samples_per_category) a.tau_pseudo_sample[q.category] = v;
    } else {
      a.tau_pseudo_sample = read_thresholds(t);
    }
  }
  read(j, "tau_unlabeled_frame", a.tau_unlabeled_frame);
  if (j.contains("collision_mode")) {
    a.collision_mode = parse_collision_mode(j.at("collision_mode").get<std::string>());
  }
  read(j, "category_shuffle", a.category_shuffle);
  if (j.contains("fade_epoch")) {
    const Json& f = j.at("fade_epoch");
    if (f.is_null()) {
      a.fade_epoch.reset();
    } else {
      const auto v = f.get<long long>();
      if (v < 0) throw FormatError("fade_epoch is negative");
      a.fade_epoch = static_cast<std::size_t>(v);
    }
  }
  read(j, "remove_occluded_points", a.remove_occluded_points);
  read(j, "seed", a.seed);
}

void parse_noise(const Json& j, NoiseModel& n) {
  reject_unknown(j, "simulation.noise",
                 {"center_sigma", "size_sigma", "yaw_sigma", "drop_rate", "fp_rate", "score",
                  "region", "categories", "nominal_size"});
  read(j, "center_sigma", n.center_sigma);
  read(j, "size_sigma", n.size_sigma);
  read(j, "yaw_sigma", n.yaw_sigma);
  read(j, "drop_rate", n.drop_rate);
  read(j, "fp_rate", n.fp_rate);
  if (j.contains("score")) {
    const Json& s = j.at("score");
    reject_unknown(s, "simulation.noise.score",
                   {"tp_mean", "fp_mean", "spread", "perturbation_penalty"});
    read(s, "tp_mean", n.score.tp_mean);
    read(s, "fp_mean", n.score.fp_mean);
    read(s, "spread", n.score.spread);
    read(s, "perturbation_penalty", n.score.perturbation_penalty);
  }
  if (j.contains("region")) {
    const auto r = j.at("region").get<std::vector<double>>();
    if (r.size() != 4) throw FormatError("simulation.noise.region needs [x_min, x_max, y_min, y_max]");
    n.x_min = r[0];
    n.x_max = r[1];
    n.y_min = r[2];
    n.y_max = r[3];
  }
  read(j, "categories", n.categories);
  if (j.contains("nominal_size")) {
    n.nominal_size.clear();
    for (const auto& [k, v] : j.at("nominal_size").items()) {
      const auto s = v.get<std::vector<double>>();
      if (s.size() != 3) throw FormatError("nominal_size." + k + " needs three values");
      n.nominal_size[k] = {s[0], s[1], s[2]};
    }
  }
}

void parse_simulation(const Json& j, SimulationConfig& s) {
  reject_unknown(j, "simulation",
                 {"batch", "epochs", "ema_alpha", "pseudo_score_threshold", "eval_iou",
                  "recall_positions", "noise", "param_count", "initial_skill", "learning_rate",
                  "pseudo_db_min_score", "min_points", "pseudo_db_rebuild_interval", "workers"});
  if (j.contains("batch")) {
    const Json& b = j.at("batch");
    reject_unknown(b, "simulation.batch", {"labeled", "unlabeled"});
    read(b, "labeled", s.labeled_batch);
    read(b, "unlabeled", s.unlabeled_batch);
  }
  read(j, "epochs", s.epochs);
  read(j, "ema_alpha", s.ema_alpha);
  if (j.contains("pseudo_score_threshold")) {
    const Json& t = j.at("pseudo_score_threshold");
    if (t.is_number()) {
      s.default_pseudo_score_threshold = t.get<double>();
      s.pseudo_score_threshold.clear();
    } else {
      s.pseudo_score_threshold = read_thresholds(t);
    }
  }
  if (j.contains("eval_iou")) {
    const Json& t = j.at("eval_iou");
    if (t.is_number()) {
      s.evaluation.default_iou = t.get<double>();
      s.evaluation.iou_threshold.clear();
    } else {
      s.evaluation.iou_threshold = read_thresholds(t);
    }
  }
  read(j, "recall_positions", s.evaluation.recall_positions);
  if (j.contains("noise")) parse_noise(j.at("noise"), s.noise);
  read(j, "param_count", s.param_count);
  read(j, "initial_skill", s.initial_skill);
  read(j, "learning_rate", s.learning_rate);
  read(j, "pseudo_db_min_score", s.pseudo_db_min_score);
  read(j, "min_points", s.min_points);
  if (j.contains("pseudo_db_rebuild_interval")) {
    const Json& r = j.at("pseudo_db_rebuild_interval");
    if (r.is_null()) {
      s.pseudo_db_rebuild_interval.reset();
    } else {
      s.pseudo_db_rebuild_interval = r.get<std::size_t>();
    }
  }
  read(j, "workers", s.workers);
}

}  // namespace

CollisionMode parse_collision_mode(std::string_view name) {
  if (name == "bev") return CollisionMode::bev;
  if (name == "full3d") return CollisionMode::full3d;
  throw FormatError("unknown collision mode '" + std::string(name) + "'");
}

std::string_view to_string(CollisionMode mode) {
  return mode == CollisionMode::bev ? "bev" : "full3d";
}

RunConfig parse_run_config(std::string_view json_text) {
  RunConfig cfg;
  try {
    const Json j = Json::parse(json_text);
    reject_unknown(j, "config", {"preset", "categories", "augmentation", "simulation"});
    const std::string preset = j.value("preset", std::string("outdoor"));
    if (preset == "outdoor") {
      cfg.augmentation = outdoor_preset();
    } else if (preset == "indoor") {
      const auto categories = j.value("categories", std::vector<std::string>{});
      if (categories.empty()) throw FormatError("indoor preset needs a categories list");
      cfg.augmentation = indoor_preset(categories);
      cfg.simulation.noise.categories = categories;
    } else {
      throw FormatError("unknown preset '" + preset + "'");
    }
    if (j.contains("augmentation")) parse_augmentation(j.at("augmentation"), cfg.augmentation);
    if (j.contains("simulation")) parse_simulation(j.at("simulation"), cfg.simulation);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  cfg.simulation.augmentation = cfg.augmentation;
  try {
    cfg.augmentation.validate();
  } catch (const InputError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string dump_run_config(const RunConfig& cfg) {
  const AugmentationConfig& a = cfg.augmentation;
  const SimulationConfig& s = cfg.simulation;
  Json aug;
  aug["strategies"] = {{"gt_on_labeled", a.strategies.gt_on_labeled},
                       {"pseudo_on_labeled", a.strategies.pseudo_on_labeled},
                       {"gt_on_unlabeled", a.strategies.gt_on_unlabeled},
                       {"pseudo_on_unlabeled", a.strategies.pseudo_on_unlabeled}};
  Json spc = Json::object();
  for (const auto& q : a.samples_per_category) spc[q.category] = q.samples;
  aug["samples_per_category"] = spc;
  aug["tau_pseudo_sample"] = thresholds_json(a.tau_pseudo_sample);
  aug["tau_unlabeled_frame"] = a.tau_unlabeled_frame;
  aug["collision_mode"] = std::string(to_string(a.collision_mode));
  aug["category_shuffle"] = a.category_shuffle;
  aug["fade_epoch"] = a.fade_epoch ? Json(*a.fade_epoch) : Json(nullptr);
  aug["remove_occluded_points"] = a.remove_occluded_points;
  aug["seed"] = a.seed;

  Json sim;
  sim["batch"] = {{"labeled", s.labeled_batch}, {"unlabeled", s.unlabeled_batch}};
  sim["epochs"] = s.epochs;
  sim["ema_alpha"] = s.ema_alpha;
  sim["pseudo_score_threshold"] = thresholds_json(s.pseudo_thresholds());
  ThresholdMap iou = s.evaluation.iou_threshold;
  if (s.evaluation.default_iou) {
    for (const auto& c : s.noise.categories) iou.emplace(c, *s.evaluation.default_iou);
  }
  sim["eval_iou"] = thresholds_json(iou);
  sim["recall_positions"] = s.evaluation.recall_positions;
  const NoiseModel& n = s.noise;
  Json nominal = Json::object();
  for (const auto& [k, v] : n.nominal_size) nominal[k] = {v.x, v.y, v.z};
  sim["noise"] = {{"center_sigma", n.center_sigma},
                  {"size_sigma", n.size_sigma},
                  {"yaw_sigma", n.yaw_sigma},
                  {"drop_rate", n.drop_rate},
                  {"fp_rate", n.fp_rate},
                  {"score",
                   {{"tp_mean", n.score.tp_mean},
                    {"fp_mean", n.score.fp_mean},
                    {"spread", n.score.spread},
                    {"perturbation_penalty", n.score.perturbation_penalty}}},
                  {"region", {n.x_min, n.x_max, n.y_min, n.y_max}},
                  {"categories", n.categories},
                  {"nominal_size", nominal}};
  sim["param_count"] = s.param_count;
  sim["initial_skill"] = s.initial_skill;
  sim["learning_rate"] = s.learning_rate;
  sim["pseudo_db_min_score"] = s.pseudo_db_min_score;
  sim["min_points"] = s.min_points;
  sim["pseudo_db_rebuild_interval"] =
      s.pseudo_db_rebuild_interval ? Json(*s.pseudo_db_rebuild_interval) : Json(nullptr);
  sim["workers"] = s.workers;

  Json j;
  j["augmentation"] = aug;
  j["simulation"] = sim;
  return j.dump(2) + "\n";
}

}  // namespace semisamp
