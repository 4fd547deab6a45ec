#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semisamp/geometry.hpp"
#include "semisamp/io.hpp"
#include "semisamp/rng.hpp"

namespace semisamp {

enum class DatabaseKind { gt, pseudo };
enum class CropMethod { box, mask };

std::string_view to_string(DatabaseKind kind);
std::string_view to_string(CropMethod method);

/// One cropped object with its points materialized.
struct ObjectSample {
  std::string category;
  PointCloud points;
  OrientedBox3D box;
  double score = 1.0;
  std::string source_frame;
  std::size_t num_points = 0;

  friend bool operator==(const ObjectSample&, const ObjectSample&) = default;
};

/// Index entry. Points live in the database's packed store at
/// [offset, offset + num_points * channel_count) floats.
struct SampleRecord {
  std::string category;
  OrientedBox3D box;
  double score = 1.0;
  std::string source_frame;
  std::size_t num_points = 0;
  std::uint64_t offset = 0;
  CropMethod crop = CropMethod::box;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

using SampleId = std::size_t;

/// Immutable per-category collection of object samples over a packed
/// float32 point store. Safe to share between threads once built.
class SampleDatabase {
 public:
  SampleDatabase(DatabaseKind kind, std::size_t channel_count,
                 std::vector<std::string> categories);

  DatabaseKind kind() const { return kind_; }
  std::size_t channel_count() const { return channels_; }
  const std::vector<std::string>& categories() const { return categories_; }
  bool has_category(std::string_view category) const;

  std::size_t size() const { return records_.size(); }
  const SampleRecord& record(SampleId id) const { return records_.at(id); }
  const std::vector<SampleRecord>& records() const { return records_; }
  /// Sample ids of one category in insertion order. Throws InputError for
  /// categories the database was not built with.
  const std::vector<SampleId>& ids(std::string_view category) const;

  /// Row-major float32 points of one sample.
  std::span<const float> raw_points(SampleId id) const;
  std::span<const float> point_store() const { return store_; }
  ObjectSample materialize(SampleId id) const;

  /// Creation metadata: thresholds used, source manifest hash, and so on.
  const std::map<std::string, std::string>& metadata() const { return meta_; }
  void set_metadata(std::string key, std::string value) { meta_[std::move(key)] = std::move(value); }

  /// Appends a sample; points are stored as float32.
  SampleId add(std::string category, const PointCloud& points, const OrientedBox3D& box,
               double score, std::string source_frame, CropMethod crop);

  friend bool operator==(const SampleDatabase&, const SampleDatabase&);

 private:
  friend SampleDatabase load_db(const std::filesystem::path&);

  DatabaseKind kind_;
  std::size_t channels_;
  std::vector<std::string> categories_;
  std::map<std::string, std::vector<SampleId>, std::less<>> by_category_;
  std::vector<SampleRecord> records_;
  std::vector<float> store_;
  std::map<std::string, std::string> meta_;
};

inline constexpr std::size_t kDefaultMinPoints = 5;

struct GtBuildOptions {
  /// Category list. Labels of other categories are skipped.
  std::vector<std::string> categories;
  bool use_masks = false;
  std::size_t min_points = kDefaultMinPoints;
  /// Used only when no frames are given.
  std::size_t channel_count = kDefaultChannelCount;
};

/// One sample per groundtruth label whose crop has at least min_points
/// points. Throws InputError when use_masks is set and a mask is missing.
SampleDatabase build_gt_database(std::span<const Frame> frames, const GtBuildOptions& options);

struct PseudoBuildOptions {
  std::vector<std::string> categories;
  double min_score = 0.0;
  std::size_t min_points = kDefaultMinPoints;
  std::size_t channel_count = kDefaultChannelCount;
};

/// Crops pseudo samples by pseudo boxes. pseudo_labels[i] belongs to
/// frames[i]; labels without a score raise FormatError.
SampleDatabase build_pseudo_database(std::span<const Frame> frames,
                                     std::span<const std::vector<Label>> pseudo_labels,
                                     const PseudoBuildOptions& options);

/// Read-only selection of a database's samples. Refers to the database,
/// which must outlive it.
class DatabaseView {
 public:
  explicit DatabaseView(const SampleDatabase& db);

  const SampleDatabase& database() const { return *db_; }
  const std::vector<SampleId>& ids(std::string_view category) const;
  std::size_t size() const;

 private:
  friend DatabaseView filter_by_score(const SampleDatabase&, const std::map<std::string, double>&);
  const SampleDatabase* db_;
  std::map<std::string, std::vector<SampleId>, std::less<>> by_category_;
};

using ThresholdMap = std::map<std::string, double>;

/// Keeps samples whose score is strictly greater than the category's
/// threshold. Every database category must have a threshold in [0, 1].
DatabaseView filter_by_score(const SampleDatabase& db, const ThresholdMap& thresholds);

/// Up to k distinct ids of one category, uniformly without replacement, in
/// draw order. Throws InputError for unknown categories.
std::vector<SampleId> draw_sample_ids(const DatabaseView& view, std::string_view category,
                                      std::size_t k, Rng& rng);
std::vector<ObjectSample> draw_samples(const DatabaseView& view, std::string_view category,
                                       std::size_t k, Rng& rng);

// Directory layout: meta, index.txt, points.bin.
void save_db(const SampleDatabase& db, const std::filesystem::path& dir);
SampleDatabase load_db(const std::filesystem::path& dir);

struct CategoryStats {
  std::size_t count = 0;
  std::size_t total_points = 0;
  /// Bin i counts samples with num_points in [2^i, 2^(i+1)).
  std::vector<std::size_t> point_histogram;
  /// Ten bins over [0, 1]; the last bin is closed.
  std::vector<std::size_t> score_histogram;
};

struct DbStats {
  DatabaseKind kind = DatabaseKind::gt;
  std::size_t total = 0;
  std::map<std::string, CategoryStats> per_category;
};

DbStats db_stats(const SampleDatabase& db);
std::string format_db_stats(const DbStats& stats);

}  // namespace semisamp
