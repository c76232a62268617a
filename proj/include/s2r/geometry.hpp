// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace s2r {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct CartesianPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// r >= 0, theta in [0, pi] measured from +z, phi in (-pi, pi].
struct SphericalPoint {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

// Yaw is stored in degrees, normalized to [0, 360), rotation about +z.
struct Box3D {
  CartesianPoint center;
  double length = 1.0;  // extent along local x
  double width = 1.0;   // extent along local y
  double height = 1.0;  // extent along local z
  double yaw_deg = 0.0;
  int category_id = 0;
  double vx = 0.0;
  double vy = 0.0;
};

inline double normalize_yaw_deg(double yaw) {
  double y = std::fmod(yaw, 360.0);
  if (y < 0.0) y += 360.0;
  if (y >= 360.0) y = 0.0;  // fmod can round back up to 360 for tiny negatives
  return y;
}

inline double deg_to_rad(double d) { return d * (kPi / 180.0); }
inline double rad_to_deg(double r) { return r * (180.0 / kPi); }

inline SphericalPoint cartesian_to_spherical(const CartesianPoint& p) {
  double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  if (r == 0.0) return {0.0, 0.0, 0.0};
  double c = p.z / r;
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  double theta = std::acos(c);
  // atan2 semantics; equals the sign-of-y arccos form away from y == 0 and
  // stays geometrically correct on the negative x-axis. Map -pi to +pi so
  // phi lies in (-pi, pi].
  double phi = std::atan2(p.y, p.x);
  if (phi <= -kPi) phi = kPi;
  return {r, theta, phi};
}

inline CartesianPoint spherical_to_cartesian(const SphericalPoint& s) {
  double st = std::sin(s.theta);
  return {s.r * st * std::cos(s.phi), s.r * st * std::sin(s.phi),
          s.r * std::cos(s.theta)};
}

// Surroundings are split into azimuth wedges crossed with radial rings; the
// outermost ring is unbounded. Heading is binned over [0, 360) degrees.
struct PartitionConfig {
  int azimuth_bins = 8;
  int radial_bins = 4;
  std::vector<double> radial_edges = {5.0, 15.0, 35.0};  // ascending, size radial_bins-1
  int heading_bins = 32;
  int num_classes = 4;

  int sector_count() const { return azimuth_bins * radial_bins; }
};

struct SectorIndex {
  int sector = 0;       // in [0, azimuth_bins * radial_bins)
  int heading_bin = 0;  // in [0, heading_bins)
  int class_id = 0;     // in [0, num_classes)
};

inline SectorIndex sector_index(const Box3D& box, const PartitionConfig& cfg) {
  if (cfg.azimuth_bins <= 0 || cfg.radial_bins <= 0 || cfg.heading_bins <= 0)
    throw std::invalid_argument("sector_index: empty partition");
  if (box.category_id < 0 || box.category_id >= cfg.num_classes)
    throw std::out_of_range("sector_index: category_id outside class library");

  // Wedges start at the +x axis and sweep counterclockwise.
  double az = std::atan2(box.center.y, box.center.x);  // 0 when center is at origin
  if (az < 0.0) az += 2.0 * kPi;
  int a = static_cast<int>(std::floor(az / (2.0 * kPi / cfg.azimuth_bins)));
  if (a >= cfg.azimuth_bins) a = 0;  // az == 2*pi wraps to the first wedge
  if (a < 0) a = 0;

  double planar = std::hypot(box.center.x, box.center.y);
  int ring = 0;
  while (ring < static_cast<int>(cfg.radial_edges.size()) &&
         planar >= cfg.radial_edges[static_cast<std::size_t>(ring)])
    ++ring;

  double yaw = normalize_yaw_deg(box.yaw_deg);
  int hb = static_cast<int>(std::floor(yaw / (360.0 / cfg.heading_bins)));
  if (hb >= cfg.heading_bins) hb = cfg.heading_bins - 1;

  return {a * cfg.radial_bins + ring, hb, box.category_id};
}

// True if p falls inside the box after undoing its pose, with `inflate`
// meters of slack on every face.
inline bool point_in_box(const CartesianPoint& p, const Box3D& box, double inflate = 0.0) {
  double yaw = deg_to_rad(box.yaw_deg);
  double c = std::cos(yaw), s = std::sin(yaw);
  double dx = p.x - box.center.x;
  double dy = p.y - box.center.y;
  double dz = p.z - box.center.z;
  double lx = c * dx + s * dy;   // rotate by -yaw
  double ly = -s * dx + c * dy;
  return std::abs(lx) <= box.length * 0.5 + inflate &&
         std::abs(ly) <= box.width * 0.5 + inflate &&
         std::abs(dz) <= box.height * 0.5 + inflate;
}

template <typename PointAt>
std::vector<std::uint32_t> points_in_box_impl(std::size_t n, PointAt&& at,
                                              const Box3D& box, double inflate) {
  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < n; ++i)
    if (point_in_box(at(i), box, inflate)) idx.push_back(static_cast<std::uint32_t>(i));
  return idx;
}

}  // namespace s2r
