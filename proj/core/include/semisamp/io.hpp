#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semisamp/geometry.hpp"

namespace semisamp {

enum class LabelSource { groundtruth, pseudo, pasted_gt, pasted_pseudo };

std::string_view to_string(LabelSource source);
/// Throws FormatError on an unrecognized name.
LabelSource parse_label_source(std::string_view name);

struct Label {
  std::string category;
  OrientedBox3D box;
  std::optional<double> score;
  LabelSource source = LabelSource::groundtruth;

  /// Score used for ranking and thresholds: groundtruth without a score
  /// counts as 1.0.
  double effective_score() const { return score.value_or(1.0); }

  friend bool operator==(const Label&, const Label&) = default;
};

/// Instance masks keyed by the label's position in Frame::labels.
using InstanceMasks = std::map<std::size_t, std::vector<std::size_t>>;

struct Frame {
  std::string frame_id;
  PointCloud cloud;
  std::vector<Label> labels;
  std::optional<InstanceMasks> instance_masks;
};

inline constexpr std::size_t kDefaultChannelCount = 4;

// Points: packed little-endian float32, row-major.
PointCloud read_points_bin(std::span<const std::uint8_t> bytes,
                           std::size_t channel_count = kDefaultChannelCount);
std::vector<std::uint8_t> write_points_bin(const PointCloud& cloud);

// Labels: one whitespace-separated record per line,
//   category cx cy cz dx dy dz yaw score|- source
// Empty lines and lines starting with '#' are skipped.
std::vector<Label> read_labels(std::string_view text);
std::string write_labels(std::span<const Label> labels);

// Masks: one line per instance, "label_index: i0 i1 ...".
InstanceMasks read_masks(std::string_view text);
std::string write_masks(const InstanceMasks& masks);

/// Dataset description stored as manifest.json at the dataset root.
struct DatasetManifest {
  std::filesystem::path root;
  std::size_t channel_count = kDefaultChannelCount;
  std::vector<std::string> categories;
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  /// Held-out frames with annotations, used for evaluation only.
  std::vector<std::string> eval;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

/// Accepts the dataset directory or the manifest file itself.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest);

struct FramePaths {
  std::filesystem::path points;
  std::filesystem::path labels;
  std::filesystem::path masks;
  std::filesystem::path truth;
  std::filesystem::path pseudo;
};
FramePaths frame_paths(const std::filesystem::path& root, std::string_view frame_id);

Frame load_frame(const std::filesystem::path& root, std::string_view frame_id,
                 std::size_t channel_count = kDefaultChannelCount);
void save_frame(const std::filesystem::path& root, const Frame& frame);

/// Reads a label file if it exists, otherwise returns nullopt.
std::optional<std::vector<Label>> read_label_file(const std::filesystem::path& path);
void write_label_file(const std::filesystem::path& path, std::span<const Label> labels);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);
/// Throws FormatError when `text` is not a complete real literal.
double parse_real(std::string_view text);

}  // namespace semisamp
