#include "semisamp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include "semisamp/error.hpp"

namespace semisamp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool finite3(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double polygon_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(twice);
}

// Projection of a box's BEV rectangle onto a unit axis: center +/- radius.
std::pair<double, double> project(const OrientedBox3D& box, double ax, double ay) {
  const double mid = box.center().x * ax + box.center().y * ay;
  const double hx = 0.5 * box.size().x;
  const double hy = 0.5 * box.size().y;
  const double ux = box.cos_yaw() * ax + box.sin_yaw() * ay;
  const double uy = -box.sin_yaw() * ax + box.cos_yaw() * ay;
  const double r = hx * std::abs(ux) + hy * std::abs(uy);
  return {mid - r, mid + r};
}

bool separated_on(const OrientedBox3D& a, const OrientedBox3D& b, double ax, double ay) {
  const auto [a0, a1] = project(a, ax, ay);
  const auto [b0, b1] = project(b, ax, ay);
  return std::min(a1, b1) - std::max(a0, b0) <= kLengthTolerance;
}

auto box_key(const OrientedBox3D& b) {
  return std::make_tuple(b.center().x, b.center().y, b.center().z, b.size().x, b.size().y,
                         b.size().z, b.yaw());
}

// Canonical argument order makes the clipped area exactly symmetric.
std::pair<const OrientedBox3D*, const OrientedBox3D*> ordered(const OrientedBox3D& a,
                                                              const OrientedBox3D& b) {
  if (box_key(b) < box_key(a)) return {&b, &a};
  return {&a, &b};
}

double clip_area(const OrientedBox3D& subject, const OrientedBox3D& clip) {
  const auto clip_poly = clip.bev_corners();
  const auto subj_poly = subject.bev_corners();
  // A convex quad clipped by four half-planes has at most 8 vertices.
  std::array<Vec2, 16> buf_a{};
  std::array<Vec2, 16> buf_b{};
  std::size_t n = 4;
  std::copy(subj_poly.begin(), subj_poly.end(), buf_a.begin());
  Vec2* in = buf_a.data();
  Vec2* out = buf_b.data();

  for (std::size_t e = 0; e < 4 && n > 0; ++e) {
    const Vec2& c0 = clip_poly[e];
    const Vec2& c1 = clip_poly[(e + 1) % 4];
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % n];
      const double sp = cross(c0, c1, p);
      const double sq = cross(c0, c1, q);
      const bool p_in = sp >= 0.0;
      const bool q_in = sq >= 0.0;
      if (p_in) out[m++] = p;
      if (p_in != q_in) {
        const double t = sp / (sp - sq);
        out[m++] = {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
      }
    }
    n = m;
    std::swap(in, out);
  }
  return polygon_area(std::span<const Vec2>(in, n));
}

}  // namespace

double normalize_yaw(double yaw) {
  if (yaw >= -kPi && yaw < kPi) return yaw;
  double y = std::fmod(yaw + kPi, kTwoPi);
  if (y < 0.0) y += kTwoPi;
  y -= kPi;
  if (y >= kPi) y -= kTwoPi;
  if (y < -kPi) y = -kPi;
  return y;
}

OrientedBox3D::OrientedBox3D(Vec3 center, Vec3 size, double yaw) {
  if (!finite3(center) || !finite3(size) || !std::isfinite(yaw)) {
    throw InputError("box parameters must be finite");
  }
  if (size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0) {
    throw InputError("box size must be strictly positive");
  }
  center_ = center;
  size_ = size;
  yaw_ = normalize_yaw(yaw);
  cos_ = std::cos(yaw_);
  sin_ = std::sin(yaw_);
}

std::array<Vec2, 4> OrientedBox3D::bev_corners() const {
  const double hx = 0.5 * size_.x;
  const double hy = 0.5 * size_.y;
  constexpr std::array<std::array<double, 2>, 4> signs{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double lx = signs[i][0] * hx;
    const double ly = signs[i][1] * hy;
    out[i] = {center_.x + cos_ * lx - sin_ * ly, center_.y + sin_ * lx + cos_ * ly};
  }
  return out;
}

double OrientedBox3D::bev_radius() const { return 0.5 * std::hypot(size_.x, size_.y); }

PointCloud::PointCloud(std::size_t channel_count) : channels_(channel_count) {
  if (channel_count < 3) throw InputError("channel_count must be at least 3");
}

PointCloud::PointCloud(std::size_t channel_count, std::vector<double> values)
    : PointCloud(channel_count) {
  if (values.size() % channel_count != 0) {
    throw InputError("value count " + std::to_string(values.size()) +
                     " is not a multiple of channel_count " + std::to_string(channel_count));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("point cloud values must be finite");
  }
  values_ = std::move(values);
}

void PointCloud::append_row(std::span<const double> row) {
  if (row.size() != channels_) throw InputError("row width does not match channel_count");
  for (double v : row) {
    if (!std::isfinite(v)) throw InputError("point cloud values must be finite");
  }
  values_.insert(values_.end(), row.begin(), row.end());
}

void PointCloud::append(const PointCloud& other) {
  if (other.channels_ != channels_) throw InputError("channel_count mismatch on append");
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

PointCloud select_rows(const PointCloud& cloud, std::span<const std::size_t> rows) {
  PointCloud out(cloud.channel_count());
  const std::size_t c = cloud.channel_count();
  out.values_.resize(rows.size() * c);
  const double* src = cloud.values_.data();
  double* dst = out.values_.data();
  for (std::size_t r : rows) {
    std::copy_n(src + r * c, c, dst);
    dst += c;
  }
  return out;
}

bool point_in_box(const Vec3& p, const OrientedBox3D& box) {
  const Vec3& c = box.center();
  const Vec3& s = box.size();
  const double dz = p.z - c.z;
  if (std::abs(dz) > 0.5 * s.z) return false;
  const double dx = p.x - c.x;
  const double dy = p.y - c.y;
  const double lx = dx * box.cos_yaw() + dy * box.sin_yaw();
  const double ly = -dx * box.sin_yaw() + dy * box.cos_yaw();
  return std::abs(lx) <= 0.5 * s.x && std::abs(ly) <= 0.5 * s.y;
}

CropResult crop_points_in_box(const PointCloud& cloud, const OrientedBox3D& box) {
  std::vector<std::size_t> idx;
  const double r = box.bev_radius();
  const Vec3& c = box.center();
  for (std::size_t i = 0, n = cloud.size(); i < n; ++i) {
    const Vec3 p = cloud.xyz(i);
    if (std::abs(p.x - c.x) > r || std::abs(p.y - c.y) > r) continue;
    if (point_in_box(p, box)) idx.push_back(i);
  }
  PointCloud out = select_rows(cloud, idx);
  return {std::move(out), std::move(idx)};
}

PointCloud crop_points_by_mask(const PointCloud& cloud, std::span<const std::size_t> mask) {
  std::vector<bool> seen(cloud.size(), false);
  for (std::size_t i : mask) {
    if (i >= cloud.size()) {
      throw InputError("mask index " + std::to_string(i) + " out of range for " +
                       std::to_string(cloud.size()) + " points");
    }
    if (seen[i]) throw InputError("duplicate mask index " + std::to_string(i));
    seen[i] = true;
  }
  return select_rows(cloud, mask);
}

bool bev_overlap(const OrientedBox3D& a, const OrientedBox3D& b) {
  const double dx = a.center().x - b.center().x;
  const double dy = a.center().y - b.center().y;
  const double reach = a.bev_radius() + b.bev_radius();
  if (dx * dx + dy * dy >= reach * reach) return false;
  for (const OrientedBox3D* box : {&a, &b}) {
    const double c = box->cos_yaw();
    const double s = box->sin_yaw();
    if (separated_on(a, b, c, s) || separated_on(a, b, -s, c)) return false;
  }
  return true;
}

bool vertical_overlap(const OrientedBox3D& a, const OrientedBox3D& b) {
  return std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min()) > kLengthTolerance;
}

bool boxes_collide(const OrientedBox3D& a, const OrientedBox3D& b, CollisionMode mode) {
  if (mode == CollisionMode::full3d && !vertical_overlap(a, b)) return false;
  return bev_overlap(a, b);
}

double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b) {
  const double dx = a.center().x - b.center().x;
  const double dy = a.center().y - b.center().y;
  const double reach = a.bev_radius() + b.bev_radius();
  if (dx * dx + dy * dy >= reach * reach) return 0.0;
  const auto [first, second] = ordered(a, b);
  const double area = clip_area(*first, *second);
  return area < kAreaTolerance ? 0.0 : area;
}

double rotated_iou_bev(const OrientedBox3D& a, const OrientedBox3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.bev_area() + b.bev_area() - inter;
  if (uni < kDegenerateUnion) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b) {
  const double h = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (h <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * h;
  if (inter == 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  if (uni < kDegenerateUnion) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace semisamp
