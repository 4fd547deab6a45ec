#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace semisamp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Maps any finite angle into [-pi, pi). Values already in range are
/// returned unchanged, so the mapping is idempotent.
double normalize_yaw(double yaw);

/// Upright box: center, full extents (dx, dy, dz) and a rotation about +z.
class OrientedBox3D {
 public:
  OrientedBox3D() = default;
  /// Throws InputError on non-finite values or non-positive size.
  OrientedBox3D(Vec3 center, Vec3 size, double yaw);

  const Vec3& center() const { return center_; }
  const Vec3& size() const { return size_; }
  double yaw() const { return yaw_; }
  double cos_yaw() const { return cos_; }
  double sin_yaw() const { return sin_; }

  double z_min() const { return center_.z - 0.5 * size_.z; }
  double z_max() const { return center_.z + 0.5 * size_.z; }
  double bev_area() const { return size_.x * size_.y; }
  double volume() const { return size_.x * size_.y * size_.z; }

  /// Counter-clockwise BEV corners.
  std::array<Vec2, 4> bev_corners() const;
  /// Half-diagonal of the BEV rectangle; bounds every corner's distance
  /// from the center.
  double bev_radius() const;

  friend bool operator==(const OrientedBox3D& a, const OrientedBox3D& b) {
    return a.center_ == b.center_ && a.size_ == b.size_ && a.yaw_ == b.yaw_;
  }

 private:
  Vec3 center_{};
  Vec3 size_{1.0, 1.0, 1.0};
  double yaw_ = 0.0;
  double cos_ = 1.0;
  double sin_ = 0.0;
};

/// Row-major N x channel_count array of finite reals. The first three
/// channels are x, y, z.
class PointCloud {
 public:
  explicit PointCloud(std::size_t channel_count = 4);
  /// Throws InputError if channel_count < 3, the value count is not a
  /// multiple of channel_count, or any value is non-finite.
  PointCloud(std::size_t channel_count, std::vector<double> values);

  std::size_t channel_count() const { return channels_; }
  std::size_t size() const { return values_.size() / channels_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * channels_, channels_};
  }
  Vec3 xyz(std::size_t i) const {
    const double* r = values_.data() + i * channels_;
    return {r[0], r[1], r[2]};
  }
  std::span<const double> values() const { return values_; }

  void reserve(std::size_t rows) { values_.reserve(rows * channels_); }
  /// Throws InputError on width mismatch or non-finite values.
  void append_row(std::span<const double> row);
  /// Appends every row of `other`; channel counts must match.
  void append(const PointCloud& other);

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  friend PointCloud select_rows(const PointCloud&, std::span<const std::size_t>);
  std::size_t channels_;
  std::vector<double> values_;
};

/// Copies the listed rows in order. Indices must be valid; unchecked.
PointCloud select_rows(const PointCloud& cloud, std::span<const std::size_t> rows);

enum class CollisionMode { bev, full3d };

// Tolerances for floating-point geometry. Lengths in meters, areas in m^2.
inline constexpr double kLengthTolerance = 1e-9;
inline constexpr double kAreaTolerance = 1e-9;
inline constexpr double kDegenerateUnion = 1e-12;

/// Closed-box containment in the box frame.
bool point_in_box(const Vec3& p, const OrientedBox3D& box);

struct CropResult {
  PointCloud cloud;
  std::vector<std::size_t> indices;
};

CropResult crop_points_in_box(const PointCloud& cloud, const OrientedBox3D& box);

/// Rows selected by an instance mask, in mask order. Throws InputError on
/// out-of-range or duplicate indices.
PointCloud crop_points_by_mask(const PointCloud& cloud, std::span<const std::size_t> mask);

/// Separating-axis test on the BEV rectangles. Touching edges or corners
/// do not count as overlap.
bool bev_overlap(const OrientedBox3D& a, const OrientedBox3D& b);

/// True iff the z-intervals share a segment longer than kLengthTolerance.
bool vertical_overlap(const OrientedBox3D& a, const OrientedBox3D& b);

/// bev: bev_overlap. full3d: bev_overlap and vertical_overlap.
bool boxes_collide(const OrientedBox3D& a, const OrientedBox3D& b, CollisionMode mode);

/// Area of the BEV rectangle intersection via Sutherland-Hodgman clipping.
/// Results below kAreaTolerance are reported as 0.
double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b);

double rotated_iou_bev(const OrientedBox3D& a, const OrientedBox3D& b);
double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b);

}  // namespace semisamp
