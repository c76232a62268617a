// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "s2r/pointcloud.hpp"

namespace s2r {

// Dense H x W x C grid, row-major with channels contiguous per cell.
struct Grid {
  int h = 0, w = 0, c = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}

  double& at(int y, int x, int ch) {
    return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  double* cell(int y, int x) { return v.data() + (static_cast<std::size_t>(y) * w + x) * c; }
  const double* cell(int y, int x) const {
    return v.data() + (static_cast<std::size_t>(y) * w + x) * c;
  }
  std::size_t numel() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// Square BEV grid centered on the ego origin.
struct BevGridConfig {
  double extent = 24.0;  // meters, grid covers [-extent, extent) in x and y
  double cell = 1.0;     // meters per cell

  int size() const {
    int n = static_cast<int>(std::lround(2.0 * extent / cell));
    if (n <= 0) throw std::invalid_argument("BEV grid has no cells");
    return n;
  }
  // Continuous cell coordinate; integer values sit on cell centers.
  double to_cell_x(double wx) const { return (wx + extent) / cell - 0.5; }
  double to_cell_y(double wy) const { return (wy + extent) / cell - 0.5; }
  double cell_center_x(int ix) const { return (ix + 0.5) * cell - extent; }
  double cell_center_y(int iy) const { return (iy + 0.5) * cell - extent; }
  bool contains(double wx, double wy) const {
    return wx >= -extent && wx < extent && wy >= -extent && wy < extent;
  }
};

// Pillar channel layout. Sim clouds produce the first four channels; clouds
// with point features add the last two.
enum PillarChannel : int {
  kPillarCount = 0,
  kPillarMeanZ = 1,
  kPillarMaxZ = 2,
  kPillarMeanRange = 3,
  kPillarMeanIntensity = 4,
  kPillarMeanTimestamp = 5,
};

inline constexpr int kSimPillarChannels = 4;
inline constexpr int kRealPillarChannels = 6;

// Deterministic per-cell aggregation; points outside the grid are dropped and
// empty cells stay all-zero.
inline Grid featurize(const PointCloud& cloud, const BevGridConfig& grid) {
  const bool with_features = cloud.channel_count() >= 2;
  const int channels = with_features ? kRealPillarChannels : kSimPillarChannels;
  const int n = grid.size();
  Grid out(n, n, channels);
  std::vector<double> max_z(static_cast<std::size_t>(n) * n,
                            -std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint p = cloud.point(i);
    if (!grid.contains(p.x, p.y)) continue;
    int ix = static_cast<int>(std::floor((p.x + grid.extent) / grid.cell));
    int iy = static_cast<int>(std::floor((p.y + grid.extent) / grid.cell));
    ix = std::clamp(ix, 0, n - 1);
    iy = std::clamp(iy, 0, n - 1);
    double* cell = out.cell(iy, ix);
    cell[kPillarCount] += 1.0;
    cell[kPillarMeanZ] += p.z;
    double& mz = max_z[static_cast<std::size_t>(iy) * n + ix];
    mz = std::max(mz, p.z);
    cell[kPillarMeanRange] += std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (with_features) {
      cell[kPillarMeanIntensity] += cloud.feature(i, 0);
      cell[kPillarMeanTimestamp] += cloud.feature(i, 1);
    }
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double* cell = out.cell(y, x);
      double count = cell[kPillarCount];
      if (count <= 0.0) continue;
      cell[kPillarMeanZ] /= count;
      cell[kPillarMaxZ] = max_z[static_cast<std::size_t>(y) * n + x];
      cell[kPillarMeanRange] /= count;
      if (with_features) {
        cell[kPillarMeanIntensity] /= count;
        cell[kPillarMeanTimestamp] /= count;
      }
    }
  }
  return out;
}

}  // namespace s2r
