#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "semisamp/harness.hpp"
#include "semisamp/rng.hpp"
#include "semisamp/synthetic.hpp"

namespace semisamp::testing {

OrientedBox3D box(double cx, double cy, double cz, double dx, double dy, double dz, double yaw) {
  return OrientedBox3D({cx, cy, cz}, {dx, dy, dz}, yaw);
}

Label gt_label(std::string category, const OrientedBox3D& b) {
  return Label{std::move(category), b, std::nullopt, LabelSource::groundtruth};
}

Label pseudo_label(std::string category, const OrientedBox3D& b, double score) {
  return Label{std::move(category), b, score, LabelSource::pseudo};
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = std::filesystem::temp_directory_path() /
          (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

namespace {

// Box in local form for the oracle: center, half extents, and the inverse
// rotation (world -> box frame).
struct LocalBox {
  double cx, cy, cz, hx, hy, hz, c, s;
  explicit LocalBox(const OrientedBox3D& b)
      : cx(b.center().x), cy(b.center().y), cz(b.center().z), hx(0.5 * b.size().x),
        hy(0.5 * b.size().y), hz(0.5 * b.size().z), c(std::cos(b.yaw())), s(std::sin(b.yaw())) {}
  bool contains_xy(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    return std::abs(lx) <= hx && std::abs(ly) <= hy;
  }
  bool contains_z(double z) const { return std::abs(z - cz) <= hz; }
  // World-aligned half extents of the BEV rectangle.
  double ex() const { return std::abs(c) * hx + std::abs(s) * hy; }
  double ey() const { return std::abs(s) * hx + std::abs(c) * hy; }
};

}  // namespace

McIou monte_carlo_iou(const OrientedBox3D& a, const OrientedBox3D& b, std::size_t samples,
                      std::uint64_t seed) {
  const LocalBox la(a), lb(b);
  // The intersection lies inside both world-aligned bounds, so sample only
  // their overlap.
  const double x0 = std::max(la.cx - la.ex(), lb.cx - lb.ex());
  const double x1 = std::min(la.cx + la.ex(), lb.cx + lb.ex());
  const double y0 = std::max(la.cy - la.ey(), lb.cy - lb.ey());
  const double y1 = std::min(la.cy + la.ey(), lb.cy + lb.ey());
  const double z0 = std::max(la.cz - la.hz, lb.cz - lb.hz);
  const double z1 = std::min(la.cz + la.hz, lb.cz + lb.hz);

  std::size_t both_xy = 0, both_xyz = 0;
  if (x1 > x0 && y1 > y0) {
    // splitmix64; mt19937_64 dominated the runtime here.
    std::uint64_t state = seed;
    auto u = [&](double lo, double hi) {
      std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      z ^= z >> 31;
      return lo + (hi - lo) * (static_cast<double>(z >> 11) * 0x1.0p-53);
    };
    for (std::size_t i = 0; i < samples; ++i) {
      const double x = u(x0, x1), y = u(y0, y1);
      if (!la.contains_xy(x, y) || !lb.contains_xy(x, y)) continue;
      ++both_xy;
      if (z1 > z0) {
        const double z = u(z0, z1);
        both_xyz += la.contains_z(z) && lb.contains_z(z);
      }
    }
  }
  const double frac_xy = static_cast<double>(both_xy) / static_cast<double>(samples);
  const double inter_bev = frac_xy * std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  const double inter_3d = both_xy == 0 ? 0.0
                                       : inter_bev * (static_cast<double>(both_xyz) / static_cast<double>(both_xy)) *
                                             std::max(0.0, z1 - z0);
  const double area_a = a.size().x * a.size().y, area_b = b.size().x * b.size().y;
  McIou out;
  out.bev = inter_bev / (area_a + area_b - inter_bev);
  out.iou3d = inter_3d / (area_a * a.size().z + area_b * b.size().z - inter_3d);
  return out;
}

std::pair<OrientedBox3D, OrientedBox3D> random_box_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-2.0, 2.0), zoff(-0.6, 0.6), size(0.5, 4.0),
      height(0.5, 2.0), yaw(-std::numbers::pi, std::numbers::pi);
  const OrientedBox3D a({0.0, 0.0, 0.0}, {size(rng), size(rng), height(rng)}, yaw(rng));
  const OrientedBox3D b({off(rng), off(rng), zoff(rng)}, {size(rng), size(rng), height(rng)},
                        yaw(rng));
  return {a, b};
}

namespace {

struct RankedPrediction {
  std::size_t frame;
  double score;
  const Label* label;
};

// Oracle AP for one ranked TP sequence; recall checks are exact integer
// comparisons tp / npos >= j / R.
double oracle_ap(const std::vector<int>& tp_flags, std::size_t npos, std::size_t R) {
  double sum = 0.0;
  for (std::size_t j = 1; j <= R; ++j) {
    double best = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < tp_flags.size(); ++k) {
      tp += tp_flags[k] ? 1 : 0;
      if (tp * R >= j * npos) {
        best = std::max(best, static_cast<double>(tp) / static_cast<double>(k + 1));
      }
    }
    sum += best;
  }
  return sum / static_cast<double>(R);
}

}  // namespace

ApResult exhaustive_ap(const std::vector<std::vector<Label>>& predictions,
                       const std::vector<std::vector<Label>>& groundtruth,
                       const EvalOptions& options) {
  std::map<std::string, std::size_t> npos;
  for (const auto& frame : groundtruth) {
    for (const auto& g : frame) ++npos[g.category];
  }
  ApResult result;
  for (const auto& [category, n] : npos) {
    const double thr = options.threshold_for(category);
    std::vector<RankedPrediction> ranked;
    for (std::size_t f = 0; f < predictions.size(); ++f) {
      for (const auto& p : predictions[f]) {
        if (p.category == category) ranked.push_back({f, p.effective_score(), &p});
      }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.score > y.score; });

    // Groundtruth of this category as (frame, label) pairs.
    std::vector<std::pair<std::size_t, const Label*>> gts;
    for (std::size_t f = 0; f < groundtruth.size(); ++f) {
      for (const auto& g : groundtruth[f]) {
        if (g.category == category) gts.push_back({f, &g});
      }
    }
    std::vector<std::vector<double>> iou(ranked.size(), std::vector<double>(gts.size(), 0.0));
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].first == ranked[k].frame) iou[k][g] = iou_3d(ranked[k].label->box, gts[g].second->box);
      }
    }

    // Enumerate assignments; assignment[k] = gt index or -1.
    std::vector<int> assignment(ranked.size(), -1);
    std::vector<char> used(gts.size(), 0);
    std::vector<std::vector<int>> greedy_consistent;
    auto consistent = [&]() {
      std::vector<char> taken(gts.size(), 0);
      for (std::size_t k = 0; k < ranked.size(); ++k) {
        int best = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (taken[g] || iou[k][g] < thr) continue;
          if (best < 0 || iou[k][g] > iou[k][static_cast<std::size_t>(best)]) best = static_cast<int>(g);
        }
        if (assignment[k] != best) return false;
        if (best >= 0) taken[static_cast<std::size_t>(best)] = 1;
      }
      return true;
    };
    auto recurse = [&](auto&& self, std::size_t k) -> void {
      if (k == ranked.size()) {
        if (consistent()) greedy_consistent.push_back(assignment);
        return;
      }
      assignment[k] = -1;
      self(self, k + 1);
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || iou[k][g] < thr) continue;
        used[g] = 1;
        assignment[k] = static_cast<int>(g);
        self(self, k + 1);
        used[g] = 0;
        assignment[k] = -1;
      }
    };
    recurse(recurse, 0);
    if (greedy_consistent.size() != 1) throw std::logic_error("oracle: greedy assignment not unique");

    std::vector<int> flags;
    for (int a : greedy_consistent.front()) flags.push_back(a >= 0 ? 1 : 0);
    result.ap[category] = oracle_ap(flags, n, options.recall_positions);
    result.num_groundtruth[category] = n;
  }
  double total = 0.0;
  for (const auto& [c, ap] : result.ap) total += ap;
  result.map = result.ap.empty() ? 0.0 : total / static_cast<double>(result.ap.size());
  return result;
}

TinyApInstance random_tiny_ap_instance(std::mt19937_64& rng) {
  static const std::vector<std::string> cats{"car", "pedestrian"};
  std::uniform_int_distribution<int> frames_d(1, 2), gts_d(1, 3), preds_d(0, 5), cat_d(0, 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.25);

  TinyApInstance inst;
  const int frames = frames_d(rng);
  inst.groundtruth.resize(static_cast<std::size_t>(frames));
  inst.predictions.resize(static_cast<std::size_t>(frames));
  const int ngt = gts_d(rng);
  std::vector<std::pair<std::size_t, Label>> placed;
  for (int i = 0; i < ngt; ++i) {
    const std::size_t f = static_cast<std::size_t>(rng() % static_cast<unsigned>(frames));
    const std::string& c = cats[static_cast<std::size_t>(cat_d(rng))];
    const Vec3 size = c == "car" ? Vec3{3.9, 1.6, 1.5} : Vec3{0.8, 0.6, 1.7};
    Label g = gt_label(c, OrientedBox3D({10.0 * i, 0.0, 0.0}, size, u01(rng) * 3.0 - 1.5));
    inst.groundtruth[f].push_back(g);
    placed.push_back({f, g});
  }
  const int npred = preds_d(rng);
  // Distinct scores: a shuffled ladder with a random offset.
  std::vector<double> scores;
  for (int i = 0; i < npred; ++i) scores.push_back((i + 1) / 6.0 - 0.05 * u01(rng));
  std::shuffle(scores.begin(), scores.end(), rng);
  for (int i = 0; i < npred; ++i) {
    const double roll = u01(rng);
    std::size_t f;
    Label p;
    if (roll < 0.75) {
      const auto& [gf, g] = placed[rng() % placed.size()];
      f = gf;
      const Vec3 c = g.box.center();
      const std::string category = u01(rng) < 0.85 ? g.category : cats[static_cast<std::size_t>(cat_d(rng))];
      p = pseudo_label(category,
                       OrientedBox3D({c.x + jitter(rng), c.y + jitter(rng), c.z + 0.3 * jitter(rng)},
                                     g.box.size(), g.box.yaw() + 0.3 * jitter(rng)),
                       scores[static_cast<std::size_t>(i)]);
    } else {
      f = static_cast<std::size_t>(rng() % static_cast<unsigned>(frames));
      p = pseudo_label(cats[static_cast<std::size_t>(cat_d(rng))],
                       OrientedBox3D({-20.0 - 5.0 * i, 5.0, 0.0}, {1.0, 1.0, 1.0}, 0.0),
                       scores[static_cast<std::size_t>(i)]);
    }
    inst.predictions[f].push_back(p);
  }
  return inst;
}

World make_world(const WorldSpec& spec) {
  World w;
  SceneSpec scene;
  scene.background_points = spec.background_points;
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.labeled; ++i) {
    w.labeled.push_back(generate_scene(scene, "l" + std::to_string(i), rng));
  }
  NoiseModel noise;
  for (std::size_t i = 0; i < spec.unlabeled; ++i) {
    Frame f = generate_scene(scene, "u" + std::to_string(i), rng);
    w.unlabeled_truth.push_back(f.labels);
    w.pseudo.push_back(synthetic_detect(f.labels, noise, spec.detector_skill, rng));
    f.labels.clear();
    f.instance_masks.reset();
    w.unlabeled.push_back(std::move(f));
  }
  GtBuildOptions g;
  g.categories = scene.categories;
  g.use_masks = true;
  w.gt_db = build_gt_database(w.labeled, g);
  PseudoBuildOptions p;
  p.categories = scene.categories;
  w.pseudo_db = build_pseudo_database(w.unlabeled, w.pseudo, p);
  return w;
}

std::size_t collision_violations(std::span<const Label> anchors,
                                 std::span<const PastedSample> pasted, CollisionMode mode) {
  auto violates = [&](const OrientedBox3D& a, const OrientedBox3D& b) {
    if (rotated_iou_bev(a, b) <= 1e-9) return false;
    if (mode == CollisionMode::bev) return true;
    return std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min()) > 1e-9;
  };
  std::size_t n = 0;
  for (std::size_t i = 0; i < pasted.size(); ++i) {
    for (const Label& a : anchors) n += violates(pasted[i].label.box, a.box) ? 1 : 0;
    for (std::size_t j = 0; j < i; ++j) n += violates(pasted[i].label.box, pasted[j].label.box) ? 1 : 0;
  }
  return n;
}

SampleDatabase mirrored_category_db(const std::vector<std::string>& categories,
                                    std::size_t per_category, double extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, extent), len(1.5, 3.5), wid(1.0, 2.5),
      yaw(-std::numbers::pi, std::numbers::pi);
  std::vector<OrientedBox3D> boxes;
  for (std::size_t i = 0; i < per_category; ++i) {
    boxes.emplace_back(Vec3{pos(rng), pos(rng), 0.8}, Vec3{len(rng), wid(rng), 1.6}, yaw(rng));
  }
  SampleDatabase db(DatabaseKind::gt, kDefaultChannelCount, categories);
  for (const auto& c : categories) {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      PointCloud pts(kDefaultChannelCount);
      const OrientedBox3D& b = boxes[i];
      for (int k = 0; k < 8; ++k) {
        const double lx = (k & 1 ? 0.4 : -0.4) * b.size().x;
        const double ly = (k & 2 ? 0.4 : -0.4) * b.size().y;
        const double lz = (k & 4 ? 0.4 : -0.4) * b.size().z;
        const double row[4] = {to_f32(b.center().x + b.cos_yaw() * lx - b.sin_yaw() * ly),
                               to_f32(b.center().y + b.sin_yaw() * lx + b.cos_yaw() * ly),
                               to_f32(b.center().z + lz), 0.5};
        pts.append_row(row);
      }
      db.add(c, pts, b, 1.0, "mirror" + std::to_string(i), CropMethod::box);
    }
  }
  return db;
}

}  // namespace semisamp::testing
