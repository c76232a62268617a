// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2r/geometry.hpp"

namespace s2r {

enum class Domain : std::uint8_t { kSim = 0, kReal = 1 };

inline const char* domain_name(Domain d) { return d == Domain::kSim ? "sim" : "real"; }

inline Domain domain_from_name(const std::string& s) {
  if (s == "sim") return Domain::kSim;
  if (s == "real") return Domain::kReal;
  throw std::invalid_argument("unknown domain tag: " + s);
}

// N points with xyz coordinates plus d per-point feature channels.
// Coordinates and features are kept in double precision in memory; the on-disk
// format (io.hpp) stores float32.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(Domain domain, std::vector<std::string> channels)
      : domain_(domain), channel_names_(std::move(channels)) {}

  Domain domain() const { return domain_; }
  void set_domain(Domain d) { domain_ = d; }

  std::size_t size() const { return xyz_.size() / 3; }
  std::size_t channel_count() const { return channel_names_.size(); }
  const std::vector<std::string>& channel_names() const { return channel_names_; }

  void reserve(std::size_t n) {
    xyz_.reserve(n * 3);
    feat_.reserve(n * channel_count());
  }

  void add_point(const CartesianPoint& p, const std::vector<double>& features = {}) {
    if (features.size() != channel_count())
      throw std::invalid_argument("add_point: feature count does not match channels");
    xyz_.push_back(p.x);
    xyz_.push_back(p.y);
    xyz_.push_back(p.z);
    feat_.insert(feat_.end(), features.begin(), features.end());
  }

  CartesianPoint point(std::size_t i) const {
    return {xyz_[i * 3], xyz_[i * 3 + 1], xyz_[i * 3 + 2]};
  }
  void set_point(std::size_t i, const CartesianPoint& p) {
    xyz_[i * 3] = p.x;
    xyz_[i * 3 + 1] = p.y;
    xyz_[i * 3 + 2] = p.z;
  }

  double feature(std::size_t i, std::size_t ch) const {
    return feat_[i * channel_count() + ch];
  }
  void set_feature(std::size_t i, std::size_t ch, double v) {
    feat_[i * channel_count() + ch] = v;
  }

  const std::vector<double>& raw_xyz() const { return xyz_; }
  const std::vector<double>& raw_features() const { return feat_; }

 private:
  Domain domain_ = Domain::kSim;
  std::vector<std::string> channel_names_;
  std::vector<double> xyz_;   // 3 per point
  std::vector<double> feat_;  // channel_count() per point
};

inline std::vector<std::uint32_t> points_in_box(const PointCloud& cloud, const Box3D& box,
                                                double inflate = 0.0) {
  return points_in_box_impl(
      cloud.size(), [&](std::size_t i) { return cloud.point(i); }, box, inflate);
}

}  // namespace s2r
