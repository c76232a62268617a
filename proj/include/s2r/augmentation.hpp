// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>

#include "s2r/geometry.hpp"
#include "s2r/pointcloud.hpp"
#include "s2r/rng.hpp"

namespace s2r {

// Per-epoch re-jittering of noiseless clouds: each point goes to spherical
// coordinates, gets independent zero-mean Gaussian offsets on (r, theta, phi),
// and comes back. Feature channels and labels are untouched.
struct JitterConfig {
  double delta_r = 0.01;        // meters
  double delta_theta = 0.0001;  // radians
  double delta_phi = 0.0001;    // radians
  bool sim_only = true;         // pass real-domain clouds through unchanged

  bool active() const { return delta_r > 0.0 || delta_theta > 0.0 || delta_phi > 0.0; }
};

namespace detail {
inline constexpr std::uint64_t kJitterStreamTag = 0x6A697474657200ull;  // "jitter"

inline std::uint64_t point_identity(const CartesianPoint& p) {
  std::uint64_t h = rng_mix(std::bit_cast<std::uint64_t>(p.x));
  h = key_fold(h, std::bit_cast<std::uint64_t>(p.y));
  h = key_fold(h, std::bit_cast<std::uint64_t>(p.z));
  return h;
}
}  // namespace detail

// Deterministic noise stream for one (dataset, epoch, sample) triple. Distinct
// epochs or samples give statistically independent draws; the same triple
// replays exactly.
inline RngStream epoch_reseed(std::uint64_t base_seed, std::uint64_t epoch,
                              std::uint64_t sample_id) {
  return make_stream(base_seed, detail::kJitterStreamTag, epoch, sample_id);
}

// The per-point sub-stream is keyed by the point's coordinate bits rather than
// its array position, so jitter commutes with any permutation of the cloud.
// Duplicate coordinates therefore receive identical offsets.
inline PointCloud jitter(const PointCloud& cloud, const JitterConfig& cfg,
                         const RngStream& stream) {
  if (cfg.sim_only && cloud.domain() != Domain::kSim) return cloud;
  PointCloud out = cloud;
  if (!cfg.active()) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CartesianPoint p = out.point(i);
    RngStream point_rng(key_fold(stream.key(), detail::point_identity(p)));
    SphericalPoint s = cartesian_to_spherical(p);
    s.r += cfg.delta_r * point_rng.gaussian();
    s.theta += cfg.delta_theta * point_rng.gaussian();
    s.phi += cfg.delta_phi * point_rng.gaussian();
    out.set_point(i, spherical_to_cartesian(s));
  }
  return out;
}

}  // namespace s2r
