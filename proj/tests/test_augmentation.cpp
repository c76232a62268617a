// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "s2r/augmentation.hpp"
#include "s2r/rng.hpp"

using namespace s2r;

namespace {

PointCloud sphere_cloud(double radius, int n, std::uint64_t seed) {
  PointCloud cloud(Domain::kSim, {});
  RngStream rng = make_stream(seed, 0);
  for (int i = 0; i < n; ++i) {
    double theta = rng.uniform(0.2, kPi - 0.2);
    double phi = rng.uniform(-kPi, kPi);
    cloud.add_point(spherical_to_cartesian({radius, theta, phi}));
  }
  return cloud;
}

}  // namespace

TEST_CASE("zero config jitter is the identity up to round-trip error", "[augmentation]") {
  PointCloud cloud = sphere_cloud(35.0, 2000, 7);
  JitterConfig cfg;
  cfg.delta_r = 0.0;
  cfg.delta_theta = 0.0;
  cfg.delta_phi = 0.0;
  PointCloud out = jitter(cloud, cfg, epoch_reseed(1, 0, 0));
  REQUIRE(out.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint a = cloud.point(i), b = out.point(i);
    REQUIRE(std::abs(a.x - b.x) < 1e-6);
    REQUIRE(std::abs(a.y - b.y) < 1e-6);
    REQUIRE(std::abs(a.z - b.z) < 1e-6);
  }
}

TEST_CASE("pure radial perturbation moves a point along its ray", "[augmentation]") {
  // delta_theta = delta_phi = 0 and a fixed radial draw: the jittered point
  // stays on the ray through the original point.
  PointCloud cloud(Domain::kSim, {});
  cloud.add_point({10.0, 0.0, 0.0});
  JitterConfig cfg;
  cfg.delta_r = 0.5;
  cfg.delta_theta = 0.0;
  cfg.delta_phi = 0.0;
  RngStream stream = epoch_reseed(3, 1, 4);
  PointCloud out = jitter(cloud, cfg, stream);

  // Reproduce the draw the implementation must have used.
  RngStream point_rng(key_fold(stream.key(), detail::point_identity({10.0, 0.0, 0.0})));
  double expected_r = 10.0 + 0.5 * point_rng.gaussian();
  REQUIRE(out.point(0).x == Catch::Approx(expected_r).epsilon(1e-12));
  REQUIRE(std::abs(out.point(0).y) < 1e-12);
  REQUIRE(std::abs(out.point(0).z) < 1e-12);
}

TEST_CASE("radial displacement std matches delta_r", "[augmentation]") {
  const double radius = 20.0, delta_r = 0.01;
  PointCloud cloud = sphere_cloud(radius, 100000, 99);
  JitterConfig cfg;
  cfg.delta_r = delta_r;
  cfg.delta_theta = 0.0;
  cfg.delta_phi = 0.0;
  PointCloud out = jitter(cloud, cfg, epoch_reseed(5, 0, 0));

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CartesianPoint p = out.point(i);
    double dr = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z) - radius;
    sum += dr;
    sum_sq += dr * dr;
  }
  double n = static_cast<double>(out.size());
  double mean = sum / n;
  double stddev = std::sqrt(sum_sq / n - mean * mean);
  REQUIRE(std::abs(stddev - delta_r) < 0.05 * delta_r);
  REQUIRE(std::abs(mean) < 0.001);
}

TEST_CASE("angular perturbation displaces tangentially by about r*delta", "[augmentation]") {
  const double radius = 20.0;
  PointCloud cloud = sphere_cloud(radius, 60000, 42);
  JitterConfig cfg;
  cfg.delta_r = 0.0;
  cfg.delta_theta = 1e-4;
  cfg.delta_phi = 1e-4;
  PointCloud out = jitter(cloud, cfg, epoch_reseed(6, 0, 0));

  // Tangential displacement of a unit-sphere direction scaled by r: for small
  // angles the polar component is r*delta_theta and the azimuthal component
  // is r*sin(theta)*delta_phi. Measure the polar part via the displacement
  // norm projected out of the radial direction for points near the equator.
  double sum_sq = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CartesianPoint a = cloud.point(i), b = out.point(i);
    SphericalPoint sa = cartesian_to_spherical(a);
    if (std::abs(sa.theta - kPi / 2) > 0.3) continue;  // near equator sin(theta) ~ 1
    double dx = b.x - a.x, dy = b.y - a.y, dz = b.z - a.z;
    sum_sq += dx * dx + dy * dy + dz * dz;
    ++used;
  }
  // Two independent tangential components, each ~ N(0, (r*1e-4)^2).
  double expected = radius * 1e-4;
  double rms_per_axis = std::sqrt(sum_sq / (2.0 * static_cast<double>(used)));
  REQUIRE(used > 10000);
  REQUIRE(std::abs(rms_per_axis - expected) < 0.10 * expected);
}

TEST_CASE("jitter preserves counts, channels and real-domain clouds", "[augmentation]") {
  PointCloud real_cloud(Domain::kReal, {"intensity", "timestamp"});
  real_cloud.add_point({5, 5, 0}, {0.7, 0.01});
  JitterConfig cfg;
  PointCloud out = jitter(real_cloud, cfg, epoch_reseed(1, 0, 0));
  REQUIRE(out.point(0).x == 5.0);  // sim_only: real clouds pass through

  cfg.sim_only = false;
  out = jitter(real_cloud, cfg, epoch_reseed(1, 0, 0));
  REQUIRE(out.point(0).x != 5.0);
  REQUIRE(out.channel_count() == 2);
  REQUIRE(out.feature(0, 0) == 0.7);  // features pass through unchanged
  REQUIRE(out.feature(0, 1) == 0.01);
}

TEST_CASE("jitter commutes with point permutation", "[augmentation]") {
  PointCloud cloud = sphere_cloud(15.0, 500, 77);
  JitterConfig cfg;
  RngStream stream = epoch_reseed(11, 3, 9);

  PointCloud jittered = jitter(cloud, cfg, stream);

  // Reverse the cloud, jitter, reverse back: identical output bitwise.
  PointCloud reversed(Domain::kSim, {});
  for (std::size_t i = cloud.size(); i-- > 0;) reversed.add_point(cloud.point(i));
  PointCloud jit_rev = jitter(reversed, cfg, stream);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint a = jittered.point(i);
    CartesianPoint b = jit_rev.point(cloud.size() - 1 - i);
    REQUIRE(a.x == b.x);
    REQUIRE(a.y == b.y);
    REQUIRE(a.z == b.z);
  }
}

TEST_CASE("epoch reseed determinism and independence", "[augmentation]") {
  // Same triple: identical draws.
  RngStream a = epoch_reseed(42, 3, 17);
  RngStream b = epoch_reseed(42, 3, 17);
  for (int i = 0; i < 32; ++i) REQUIRE(a.gaussian() == b.gaussian());

  // Distinct epochs: near-zero correlation over 1e4 draws.
  RngStream e0 = epoch_reseed(42, 0, 17);
  RngStream e1 = epoch_reseed(42, 1, 17);
  const int n = 10000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    double x = e0.gaussian(), y = e1.gaussian();
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  double cov = sxy / n - (sx / n) * (sy / n);
  double corr = cov / std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
  REQUIRE(std::abs(corr) < 0.05);

  // Distinct sample ids differ.
  RngStream s1 = epoch_reseed(42, 0, 1);
  RngStream s2 = epoch_reseed(42, 0, 2);
  bool all_same = true;
  for (int i = 0; i < 16; ++i)
    if (s1.gaussian() != s2.gaussian()) all_same = false;
  REQUIRE_FALSE(all_same);
}
