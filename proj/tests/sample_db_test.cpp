#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "semisamp/error.hpp"
#include "semisamp/sample_db.hpp"
#include "semisamp/synthetic.hpp"
#include "support/support.hpp"

using namespace semisamp;
using semisamp::testing::box;
using semisamp::testing::gt_label;
using semisamp::testing::pseudo_label;
using semisamp::testing::TempDir;

namespace {

// n points spread inside box b.
void fill(PointCloud& cloud, const OrientedBox3D& b, int n) {
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n - 0.5;
    const double row[4] = {b.center().x + 0.8 * t * b.size().x, b.center().y,
                           b.center().z + 0.3 * t * b.size().z, 0.1 * i};
    cloud.append_row(row);
  }
}

Frame three_object_frame() {
  Frame f;
  f.frame_id = "f0";
  f.cloud = PointCloud(4);
  f.labels = {gt_label("car", box(0, 0, 0, 4, 2, 2)), gt_label("car", box(10, 0, 0, 4, 2, 2)),
              gt_label("pedestrian", box(20, 0, 0, 1, 1, 2))};
  for (const auto& l : f.labels) fill(f.cloud, l.box, 12);
  return f;
}

SampleDatabase scored_db(const std::vector<std::pair<std::string, double>>& samples) {
  SampleDatabase db(DatabaseKind::pseudo, 4, {"car", "pedestrian", "cyclist"});
  PointCloud pts(4, std::vector<double>(4 * 5, 0.0));
  for (const auto& [c, s] : samples) db.add(c, pts, box(0, 0, 0, 1, 1, 1), s, "src", CropMethod::box);
  return db;
}

std::vector<double> view_scores(const DatabaseView& v, const std::string& c) {
  std::vector<double> out;
  for (SampleId id : v.ids(c)) out.push_back(v.database().record(id).score);
  return out;
}

}  // namespace

TEST(BuildGt, CountsPerCategory) {
  const Frame f = three_object_frame();
  GtBuildOptions o;
  o.categories = {"car", "pedestrian"};
  const auto db = build_gt_database(std::span(&f, 1), o);
  EXPECT_EQ(db.size(), 3u);
  EXPECT_EQ(db.ids("car").size(), 2u);
  EXPECT_EQ(db.ids("pedestrian").size(), 1u);
  for (const auto& r : db.records()) {
    EXPECT_EQ(r.score, 1.0);
    EXPECT_EQ(r.num_points, 12u);
    EXPECT_EQ(r.source_frame, "f0");
  }
  EXPECT_EQ(db.metadata().at("min_points"), "5");
}

TEST(BuildGt, EmptyBoxExcludedByMinPoints) {
  Frame f = three_object_frame();
  f.labels.push_back(gt_label("car", box(50, 50, 0, 4, 2, 2)));
  GtBuildOptions o;
  o.categories = {"car", "pedestrian"};
  EXPECT_EQ(build_gt_database(std::span(&f, 1), o).size(), 3u);
  o.min_points = 13;
  EXPECT_EQ(build_gt_database(std::span(&f, 1), o).size(), 0u);
  o.min_points = 0;
  EXPECT_EQ(build_gt_database(std::span(&f, 1), o).size(), 4u);
}

TEST(BuildGt, SkipsPseudoAndUnknownCategories) {
  Frame f = three_object_frame();
  f.labels.push_back(pseudo_label("car", f.labels[0].box, 0.9));
  f.labels.push_back(gt_label("tram", f.labels[1].box));
  GtBuildOptions o;
  o.categories = {"car", "pedestrian"};
  EXPECT_EQ(build_gt_database(std::span(&f, 1), o).size(), 3u);
}

TEST(BuildGt, MaskCropKeepsOnlyInstancePoints) {
  // A chair sits under a table; the chair's box also contains table legs.
  Frame f;
  f.frame_id = "room";
  f.cloud = PointCloud(4);
  const auto table = box(0, 0, 0.5, 1.6, 1.0, 1.0);
  const auto chair = box(0.2, 0.0, 0.3, 0.6, 0.6, 0.6);
  std::vector<std::size_t> chair_idx, table_idx;
  for (int i = 0; i < 20; ++i) {
    const double row[4] = {0.05 + 0.01 * i, 0.0, 0.1 + 0.02 * i, 1.0};
    chair_idx.push_back(f.cloud.size());
    f.cloud.append_row(row);
  }
  for (int i = 0; i < 10; ++i) {
    // Table leg points, inside the chair box as well.
    const double row[4] = {0.45, 0.25, 0.05 + 0.05 * i, 2.0};
    table_idx.push_back(f.cloud.size());
    f.cloud.append_row(row);
  }
  for (int i = 0; i < 10; ++i) {
    const double row[4] = {-0.7 + 0.14 * i, -0.4, 0.95, 2.0};
    table_idx.push_back(f.cloud.size());
    f.cloud.append_row(row);
  }
  f.labels = {gt_label("table", table), gt_label("chair", chair)};
  f.instance_masks = InstanceMasks{{0, table_idx}, {1, chair_idx}};

  GtBuildOptions o;
  o.categories = {"table", "chair"};
  o.use_masks = true;
  const auto masked = build_gt_database(std::span(&f, 1), o);
  const auto& chair_rec = masked.record(masked.ids("chair").front());
  EXPECT_EQ(chair_rec.num_points, 20u);
  EXPECT_EQ(chair_rec.crop, CropMethod::mask);
  for (std::size_t r = 0; r < chair_rec.num_points; ++r) {
    EXPECT_EQ(masked.materialize(masked.ids("chair").front()).points.row(r)[3], 1.0);
  }

  o.use_masks = false;
  const auto boxed = build_gt_database(std::span(&f, 1), o);
  EXPECT_EQ(boxed.record(boxed.ids("chair").front()).num_points, 30u);

  f.instance_masks->erase(1);
  o.use_masks = true;
  EXPECT_THROW(build_gt_database(std::span(&f, 1), o), InputError);
}

TEST(BuildGt, SamplesAreExactRecrops) {
  Rng rng(4);
  SceneSpec spec;
  std::vector<Frame> frames;
  for (int i = 0; i < 4; ++i) frames.push_back(generate_scene(spec, "g" + std::to_string(i), rng));
  GtBuildOptions o;
  o.categories = spec.categories;
  const auto db = build_gt_database(frames, o);
  std::size_t expected = 0;
  for (const auto& f : frames) {
    for (const auto& l : f.labels) expected += crop_points_in_box(f.cloud, l.box).cloud.size() >= 5;
  }
  EXPECT_EQ(db.size(), expected);
  for (SampleId id = 0; id < db.size(); ++id) {
    const auto s = db.materialize(id);
    const auto& src = *std::find_if(frames.begin(), frames.end(),
                                    [&](const Frame& f) { return f.frame_id == s.source_frame; });
    EXPECT_EQ(s.points, crop_points_in_box(src.cloud, s.box).cloud);
  }
}

TEST(BuildPseudo, MinScoreAndErrors) {
  Frame f = three_object_frame();
  const std::vector<Label> labels{pseudo_label("car", f.labels[0].box, 0.9),
                                  pseudo_label("car", f.labels[1].box, 0.4)};
  f.labels.clear();
  const std::vector<std::vector<Label>> all{labels};
  PseudoBuildOptions o;
  o.categories = {"car", "pedestrian", "cyclist"};
  o.min_score = 0.5;
  const auto db = build_pseudo_database(std::span(&f, 1), all, o);
  ASSERT_EQ(db.size(), 1u);
  EXPECT_EQ(db.record(0).score, 0.9);
  o.min_score = 0.0;
  EXPECT_EQ(build_pseudo_database(std::span(&f, 1), all, o).size(), 2u);

  std::vector<std::vector<Label>> unscored{{labels[0]}};
  unscored[0][0].score.reset();
  EXPECT_THROW(build_pseudo_database(std::span(&f, 1), unscored, o), FormatError);
  EXPECT_THROW(build_pseudo_database(std::span(&f, 1), std::span<const std::vector<Label>>{}, o),
               InputError);
}

TEST(FilterByScore, StrictPerCategoryThresholds) {
  const auto db = scored_db({{"car", 0.85}, {"car", 0.75}, {"pedestrian", 0.72}, {"car", 0.8},
                             {"cyclist", 0.7}, {"cyclist", 0.71}});
  const ThresholdMap tau{{"car", 0.8}, {"pedestrian", 0.7}, {"cyclist", 0.7}};
  const auto v = filter_by_score(db, tau);
  EXPECT_EQ(view_scores(v, "car"), std::vector<double>{0.85});
  EXPECT_EQ(view_scores(v, "pedestrian"), std::vector<double>{0.72});
  EXPECT_EQ(view_scores(v, "cyclist"), std::vector<double>{0.71});
  EXPECT_EQ(v.size(), 3u);

  const auto zero = filter_by_score(db, {{"car", 0.0}, {"pedestrian", 0.0}, {"cyclist", 0.0}});
  EXPECT_EQ(zero.size(), db.size());
  const auto one = filter_by_score(db, {{"car", 1.0}, {"pedestrian", 1.0}, {"cyclist", 1.0}});
  EXPECT_EQ(one.size(), 0u);

  EXPECT_THROW(filter_by_score(db, {{"car", 0.5}}), InputError);
  EXPECT_THROW(filter_by_score(db, {{"car", 1.5}, {"pedestrian", 0}, {"cyclist", 0}}), InputError);
}

TEST(FilterByScore, RetainedSetMatchesScoreComparison) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<std::string, double>> samples;
  const std::vector<std::string> cats{"car", "pedestrian", "cyclist"};
  for (int i = 0; i < 300; ++i) samples.push_back({cats[i % 3], std::round(u(rng) * 100) / 100});
  const auto db = scored_db(samples);
  const ThresholdMap tau{{"car", 0.8}, {"pedestrian", 0.7}, {"cyclist", 0.7}};
  const auto v = filter_by_score(db, tau);
  for (const auto& c : cats) {
    std::vector<double> expected;
    for (const auto& [sc, s] : samples) {
      if (sc == c && s > tau.at(c)) expected.push_back(s);
    }
    EXPECT_EQ(view_scores(v, c), expected);
  }
}

TEST(Draw, EdgeCasesAndDeterminism) {
  const auto db = scored_db({{"car", 0.9}, {"car", 0.9}, {"car", 0.9}, {"car", 0.9}});
  const DatabaseView v(db);
  Rng rng(1);
  EXPECT_TRUE(draw_samples(v, "car", 0, rng).empty());
  auto ids = draw_sample_ids(v, "car", 10, rng);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, (std::vector<SampleId>{0, 1, 2, 3}));
  EXPECT_TRUE(draw_sample_ids(v, "pedestrian", 3, rng).empty());
  EXPECT_THROW(draw_sample_ids(v, "tram", 1, rng), InputError);

  Rng a(77), b(77);
  EXPECT_EQ(draw_sample_ids(v, "car", 2, a), draw_sample_ids(v, "car", 2, b));
}

TEST(Draw, SingleDrawsAreUniform) {
  std::vector<std::pair<std::string, double>> samples(20, {"car", 0.9});
  const auto db = scored_db(samples);
  const DatabaseView v(db);
  std::vector<int> hits(20, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    Rng rng(derive_seed(5, "uniform", static_cast<std::uint64_t>(i), "draw"));
    ++hits[draw_sample_ids(v, "car", 1, rng).front()];
  }
  const double p = 1.0 / 20, sd = std::sqrt(draws * p * (1 - p));
  for (int h : hits) EXPECT_LT(std::abs(h - draws * p), 3 * sd);
}

TEST(Draw, MultiDrawsWithoutReplacementAreUniform) {
  std::vector<std::pair<std::string, double>> samples(10, {"car", 0.9});
  const auto db = scored_db(samples);
  const DatabaseView v(db);
  std::vector<int> hits(10, 0);
  Rng rng(99);
  const int runs = 20000;
  for (int i = 0; i < runs; ++i) {
    auto ids = draw_sample_ids(v, "car", 4, rng);
    std::vector<SampleId> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    ASSERT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    for (auto id : ids) ++hits[id];
  }
  const double p = 0.4, sd = std::sqrt(runs * p * (1 - p));
  for (int h : hits) EXPECT_LT(std::abs(h - runs * p), 4 * sd);
}

TEST(Persistence, RoundTripGenerated) {
  TempDir dir;
  Rng rng(12);
  SceneSpec spec;
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(generate_scene(spec, "p" + std::to_string(i), rng));
  GtBuildOptions o;
  o.categories = spec.categories;
  o.use_masks = true;
  auto db = build_gt_database(frames, o);
  db.set_metadata("source", "unit test");
  save_db(db, dir / "db");
  const auto loaded = load_db(dir / "db");
  EXPECT_TRUE(loaded == db);
  EXPECT_EQ(loaded.metadata().at("source"), "unit test");
  EXPECT_EQ(format_db_stats(db_stats(loaded)), format_db_stats(db_stats(db)));
}

TEST(Persistence, EmptyDatabaseRoundTrips) {
  TempDir dir;
  const SampleDatabase db(DatabaseKind::pseudo, 5, {"a", "b"});
  save_db(db, dir / "db");
  const auto loaded = load_db(dir / "db");
  EXPECT_TRUE(loaded == db);
  EXPECT_EQ(loaded.size(), 0u);
  EXPECT_EQ(loaded.channel_count(), 5u);
  EXPECT_EQ(loaded.kind(), DatabaseKind::pseudo);
}

TEST(Persistence, CorruptionIsAFormatError) {
  TempDir dir;
  const auto db = scored_db({{"car", 0.9}, {"cyclist", 0.4}});
  save_db(db, dir / "db");
  const auto points = dir / "db" / "points.bin";
  const auto size = std::filesystem::file_size(points);
  std::filesystem::resize_file(points, size - 1);
  EXPECT_THROW(load_db(dir / "db"), FormatError);

  save_db(db, dir / "db2");
  write_text_file(dir / "db2" / "index.txt", "# wrong header\n");
  EXPECT_THROW(load_db(dir / "db2"), FormatError);

  save_db(db, dir / "db3");
  auto meta = read_text_file(dir / "db3" / "meta");
  meta.replace(meta.find("format_version=1"), 16, "format_version=9");
  write_text_file(dir / "db3" / "meta", meta);
  EXPECT_THROW(load_db(dir / "db3"), FormatError);

  EXPECT_THROW(load_db(dir / "absent"), NotFoundError);
}

TEST(Stats, CountsAndHistograms) {
  SampleDatabase db(DatabaseKind::gt, 4, {"A", "B"});
  PointCloud pts(4, std::vector<double>(4 * 6, 0.0));
  db.add("A", pts, box(0, 0, 0, 1, 1, 1), 1.0, "x", CropMethod::box);
  db.add("A", pts, box(0, 0, 0, 1, 1, 1), 1.0, "x", CropMethod::box);
  db.add("B", pts, box(0, 0, 0, 1, 1, 1), 1.0, "x", CropMethod::box);
  const auto s = db_stats(db);
  EXPECT_EQ(s.total, 3u);
  EXPECT_EQ(s.per_category.at("A").count, 2u);
  EXPECT_EQ(s.per_category.at("B").count, 1u);
  EXPECT_EQ(s.per_category.at("A").total_points, 12u);
  // 6 points fall in [4, 8).
  EXPECT_EQ(s.per_category.at("A").point_histogram[2], 2u);
  EXPECT_EQ(s.per_category.at("A").score_histogram.back(), 2u);
  EXPECT_NE(format_db_stats(s).find("total 3\n"), std::string::npos);

  const auto e = db_stats(SampleDatabase(DatabaseKind::gt, 4, {"A"}));
  EXPECT_EQ(e.total, 0u);
  EXPECT_EQ(e.per_category.at("A").count, 0u);
  for (auto v : e.per_category.at("A").score_histogram) EXPECT_EQ(v, 0u);

  EXPECT_THROW(db.add("A", pts, box(0, 0, 0, 1, 1, 1), 0.5, "x", CropMethod::box), InputError);
  EXPECT_THROW(db.add("C", pts, box(0, 0, 0, 1, 1, 1), 1.0, "x", CropMethod::box), InputError);
}
