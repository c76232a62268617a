// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "s2r/geometry.hpp"
#include "s2r/io.hpp"
#include "s2r/pointcloud.hpp"
#include "s2r/rng.hpp"

namespace s2r {

// ---------------------------------------------------------------------------
// Sensor model.

struct SensorNoise {
  double range_sigma = 0.0;    // meters
  double polar_sigma = 0.0;    // radians
  double azimuth_sigma = 0.0;  // radians

  bool active() const { return range_sigma > 0.0 || polar_sigma > 0.0 || azimuth_sigma > 0.0; }
};

struct LidarModel {
  std::vector<double> elevation_angles_deg;  // one per beam, from horizontal
  double azimuth_step_deg = 1.0;             // must divide 360 evenly
  double max_range = 60.0;
  SensorNoise noise;

  int beam_count() const { return static_cast<int>(elevation_angles_deg.size()); }

  int azimuth_steps() const {
    double steps = 360.0 / azimuth_step_deg;
    double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9)
      throw std::invalid_argument("azimuth_step_deg must divide 360 evenly");
    return static_cast<int>(rounded);
  }

  static std::vector<double> linspace_elevations(int n_beams, double lo_deg, double hi_deg) {
    std::vector<double> v(static_cast<std::size_t>(n_beams));
    for (int i = 0; i < n_beams; ++i)
      v[static_cast<std::size_t>(i)] =
          n_beams == 1 ? lo_deg : lo_deg + (hi_deg - lo_deg) * i / (n_beams - 1);
    return v;
  }
};

// ---------------------------------------------------------------------------
// Scene content.

enum class ShapeKind : std::uint8_t { kCuboid = 0, kCylinder = 1 };

struct ObjectSpec {
  ShapeKind shape = ShapeKind::kCuboid;
  Box3D box;                  // pose, size, category, velocity
  double reflectivity = 0.5;  // in (0, 1]
};

struct SceneDescription {
  int scene_id = 0;
  std::vector<ObjectSpec> objects;
  double ground_z = -1.8;  // sensor sits at the origin
  Domain domain = Domain::kSim;
  std::uint64_t seed = 0;
};

inline constexpr double kEgoExclusionRadius = 2.0;

// Planar distance from the origin to the box footprint (0 when inside).
inline double footprint_distance_to_origin(const Box3D& box) {
  double yaw = deg_to_rad(box.yaw_deg);
  double c = std::cos(yaw), s = std::sin(yaw);
  double lx = c * (-box.center.x) + s * (-box.center.y);
  double ly = -s * (-box.center.x) + c * (-box.center.y);
  double ex = std::max(std::abs(lx) - box.length * 0.5, 0.0);
  double ey = std::max(std::abs(ly) - box.width * 0.5, 0.0);
  return std::hypot(ex, ey);
}

inline void validate_scene(const SceneDescription& scene) {
  for (const auto& obj : scene.objects) {
    if (obj.reflectivity <= 0.0 || obj.reflectivity > 1.0)
      throw std::invalid_argument("object reflectivity must be in (0, 1]");
    if (footprint_distance_to_origin(obj.box) < kEgoExclusionRadius)
      throw std::invalid_argument("scene violates the 2 m ego exclusion zone");
  }
}

// ---------------------------------------------------------------------------
// Ray-primitive intersections. Rays start at the origin with unit direction.

struct RayHit {
  double t = 0.0;  // range along the ray
  CartesianPoint normal;
};

inline std::optional<RayHit> ray_ground(const CartesianPoint& d, double ground_z) {
  if (d.z >= -1e-12) return std::nullopt;
  double t = ground_z / d.z;
  if (t <= 0.0) return std::nullopt;
  return RayHit{t, {0.0, 0.0, 1.0}};
}

inline std::optional<RayHit> ray_cuboid(const CartesianPoint& d, const Box3D& box) {
  double yaw = deg_to_rad(box.yaw_deg);
  double c = std::cos(yaw), s = std::sin(yaw);
  // Ray in the box frame.
  double ox = c * (-box.center.x) + s * (-box.center.y);
  double oy = -s * (-box.center.x) + c * (-box.center.y);
  double oz = -box.center.z;
  double dx = c * d.x + s * d.y;
  double dy = -s * d.x + c * d.y;
  double dz = d.z;

  double half[3] = {box.length * 0.5, box.width * 0.5, box.height * 0.5};
  double o[3] = {ox, oy, oz};
  double dir[3] = {dx, dy, dz};

  double t_enter = 0.0, t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  double enter_sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (std::abs(o[a]) > half[a]) return std::nullopt;
      continue;
    }
    double t1 = (-half[a] - o[a]) / dir[a];
    double t2 = (half[a] - o[a]) / dir[a];
    double sign = -1.0;
    if (t1 > t2) {
      std::swap(t1, t2);
      sign = 1.0;
    }
    if (t1 > t_enter) {
      t_enter = t1;
      enter_axis = a;
      enter_sign = sign;
    }
    t_exit = std::min(t_exit, t2);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (enter_axis < 0 || t_enter <= 0.0) return std::nullopt;  // origin inside or behind

  double ln[3] = {0.0, 0.0, 0.0};
  ln[enter_axis] = enter_sign;
  CartesianPoint n{c * ln[0] - s * ln[1], s * ln[0] + c * ln[1], ln[2]};
  return RayHit{t_enter, n};
}

inline std::optional<RayHit> ray_cylinder(const CartesianPoint& d, const Box3D& box) {
  double radius = box.width * 0.5;
  double half_h = box.height * 0.5;
  double cx = box.center.x, cy = box.center.y, cz = box.center.z;

  std::optional<RayHit> best;
  auto consider = [&](double t, const CartesianPoint& n) {
    if (t > 0.0 && (!best || t < best->t)) best = RayHit{t, n};
  };

  // Lateral surface.
  double a = d.x * d.x + d.y * d.y;
  if (a > 1e-15) {
    double b = -2.0 * (cx * d.x + cy * d.y);
    double c0 = cx * cx + cy * cy - radius * radius;
    double disc = b * b - 4.0 * a * c0;
    if (disc >= 0.0) {
      double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        double z = t * d.z;
        if (t > 0.0 && std::abs(z - cz) <= half_h) {
          CartesianPoint n{(t * d.x - cx) / radius, (t * d.y - cy) / radius, 0.0};
          consider(t, n);
        }
      }
    }
  }
  // Caps.
  if (std::abs(d.z) > 1e-15) {
    for (double sign : {-1.0, 1.0}) {
      double t = (cz + sign * half_h) / d.z;
      if (t > 0.0) {
        double px = t * d.x - cx, py = t * d.y - cy;
        if (px * px + py * py <= radius * radius)
          consider(t, {0.0, 0.0, sign});
      }
    }
  }
  return best;
}

inline std::optional<RayHit> ray_object(const CartesianPoint& d, const ObjectSpec& obj) {
  return obj.shape == ShapeKind::kCuboid ? ray_cuboid(d, obj.box) : ray_cylinder(d, obj.box);
}

// ---------------------------------------------------------------------------
// Raycast.

struct RaycastOptions {
  bool point_features = false;       // emit intensity + timestamp channels
  double ground_reflectivity = 0.2;
  double sweep_seconds = 0.05;
};

namespace detail {
inline constexpr std::uint64_t kNoiseStreamTag = 0x6E6F697365ull;  // "noise"
}

// Casts one ray per (beam, azimuth step), keeps the nearest hit within
// max_range, and applies the sensor's spherical noise model. Rays are scanned
// azimuth-major per beam; the per-ray noise stream is keyed by ray index so
// the output is independent of any loop restructuring.
inline std::pair<PointCloud, std::vector<Box3D>> raycast_scene(const SceneDescription& scene,
                                                               const LidarModel& lidar,
                                                               const RaycastOptions& opts = {}) {
  validate_scene(scene);

  std::vector<std::string> channels;
  if (opts.point_features) channels = {"intensity", "timestamp"};
  PointCloud cloud(scene.domain, channels);

  const int beams = lidar.beam_count();
  const int steps = lidar.azimuth_steps();
  cloud.reserve(static_cast<std::size_t>(beams) * static_cast<std::size_t>(steps));

  std::vector<bool> hit_mask(scene.objects.size(), false);
  const bool noisy = lidar.noise.active();

  for (int b = 0; b < beams; ++b) {
    double elev = deg_to_rad(lidar.elevation_angles_deg[static_cast<std::size_t>(b)]);
    double ce = std::cos(elev), se = std::sin(elev);
    for (int k = 0; k < steps; ++k) {
      double az = -kPi + 2.0 * kPi * k / steps;
      CartesianPoint dir{ce * std::cos(az), ce * std::sin(az), se};

      std::optional<RayHit> best = ray_ground(dir, scene.ground_z);
      int hit_obj = -1;
      for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
        auto h = ray_object(dir, scene.objects[oi]);
        if (h && (!best || h->t < best->t)) {
          best = h;
          hit_obj = static_cast<int>(oi);
        }
      }
      if (!best || best->t > lidar.max_range) continue;
      if (hit_obj >= 0) hit_mask[static_cast<std::size_t>(hit_obj)] = true;

      double r = best->t;
      double theta = kPi * 0.5 - elev;  // polar angle of the emission direction
      double phi = az;
      if (noisy) {
        std::uint64_t ray_index =
            static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(steps) +
            static_cast<std::uint64_t>(k);
        RngStream rng = make_stream(scene.seed, detail::kNoiseStreamTag, ray_index);
        r += lidar.noise.range_sigma * rng.gaussian();
        theta += lidar.noise.polar_sigma * rng.gaussian();
        phi += lidar.noise.azimuth_sigma * rng.gaussian();
      }
      CartesianPoint p = spherical_to_cartesian({r, theta, phi});

      if (opts.point_features) {
        double refl = hit_obj >= 0 ? scene.objects[static_cast<std::size_t>(hit_obj)].reflectivity
                                   : opts.ground_reflectivity;
        const CartesianPoint& n = best->normal;
        double cos_inc = std::abs(dir.x * n.x + dir.y * n.y + dir.z * n.z);
        double intensity = refl * cos_inc;
        double timestamp = opts.sweep_seconds * k / steps;
        cloud.add_point(p, {intensity, timestamp});
      } else {
        cloud.add_point(p);
      }
    }
  }

  std::vector<Box3D> labels;
  for (std::size_t oi = 0; oi < scene.objects.size(); ++oi)
    if (hit_mask[oi]) labels.push_back(scene.objects[oi].box);
  return {std::move(cloud), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Procedural scene sampling.

struct ClassSpec {
  std::string name;
  ShapeKind shape = ShapeKind::kCuboid;
  double length = 4.0, width = 2.0, height = 1.6;  // nominal size
  double size_spread = 0.12;                       // uniform +/- fraction per axis
  double refl_lo = 0.4, refl_hi = 0.7;
  double speed_max = 10.0;
};

inline std::vector<ClassSpec> default_class_library() {
  return {
      {"car", ShapeKind::kCuboid, 4.4, 1.9, 1.55, 0.12, 0.55, 0.68, 12.0},
      {"truck", ShapeKind::kCuboid, 7.5, 2.5, 2.9, 0.15, 0.32, 0.42, 10.0},
      {"pedestrian", ShapeKind::kCylinder, 0.7, 0.7, 1.75, 0.12, 0.80, 0.95, 2.0},
      {"cyclist", ShapeKind::kCuboid, 1.8, 0.6, 1.65, 0.12, 0.15, 0.25, 6.0},
  };
}

struct SceneParams {
  int min_objects = 4;
  int max_objects = 10;
  double spawn_r_min = 4.5;
  double spawn_r_max = 21.0;
  double ground_z = -1.8;
  int placement_attempts = 40;
};

struct DomainParams {
  Domain domain = Domain::kSim;
  SensorNoise noise;                   // zero in the sim domain
  bool point_features = false;         // intensity + timestamp channels
  double deform_strength = 0.0;        // per-class shape scaling, 0 disables
  std::uint64_t deform_seed = 0x5F53484150455Full;  // fixed per-domain shape identity
  double ground_reflectivity = 0.2;
};

// Per-class per-axis shape factor; a fixed function of (seed, class, axis) so
// the "real" world deforms every instance of a class the same way across all
// scenes and datasets.
inline double class_deform_factor(const DomainParams& dp, int class_id, int axis) {
  if (dp.deform_strength <= 0.0) return 1.0;
  RngStream rng = make_stream(dp.deform_seed, static_cast<std::uint64_t>(class_id),
                              static_cast<std::uint64_t>(axis));
  return 1.0 + dp.deform_strength * (2.0 * rng.uniform() - 1.0);
}

namespace detail {
inline constexpr std::uint64_t kSceneStreamTag = 0x7363656E65ull;  // "scene"
}

inline SceneDescription make_random_scene(int scene_id, std::uint64_t scene_seed,
                                          const DomainParams& dp, const SceneParams& sp,
                                          const std::vector<ClassSpec>& classes) {
  SceneDescription scene;
  scene.scene_id = scene_id;
  scene.seed = scene_seed;
  scene.domain = dp.domain;
  scene.ground_z = sp.ground_z;

  RngStream rng = make_stream(scene_seed, detail::kSceneStreamTag);
  int target = sp.min_objects +
               static_cast<int>(rng.uniform_index(
                   static_cast<std::uint64_t>(sp.max_objects - sp.min_objects + 1)));

  for (int i = 0; i < target; ++i) {
    for (int attempt = 0; attempt < sp.placement_attempts; ++attempt) {
      int cls = static_cast<int>(rng.uniform_index(classes.size()));
      const ClassSpec& cs = classes[static_cast<std::size_t>(cls)];

      ObjectSpec obj;
      obj.shape = cs.shape;
      obj.box.category_id = cls;
      double sl = cs.length * (1.0 + cs.size_spread * (2.0 * rng.uniform() - 1.0));
      double sw = cs.width * (1.0 + cs.size_spread * (2.0 * rng.uniform() - 1.0));
      double sh = cs.height * (1.0 + cs.size_spread * (2.0 * rng.uniform() - 1.0));
      if (cs.shape == ShapeKind::kCylinder) sl = sw;  // circular footprint
      sl *= class_deform_factor(dp, cls, 0);
      sw *= class_deform_factor(dp, cls, 1);
      sh *= class_deform_factor(dp, cls, 2);
      obj.box.length = sl;
      obj.box.width = sw;
      obj.box.height = sh;

      double range = rng.uniform(sp.spawn_r_min, sp.spawn_r_max);
      double az = rng.uniform(-kPi, kPi);
      obj.box.center = {range * std::cos(az), range * std::sin(az), sp.ground_z + sh * 0.5};
      obj.box.yaw_deg = rng.uniform(0.0, 360.0);
      obj.box.vx = rng.uniform(-cs.speed_max, cs.speed_max);
      obj.box.vy = rng.uniform(-cs.speed_max, cs.speed_max);
      obj.reflectivity = rng.uniform(cs.refl_lo, cs.refl_hi);

      if (footprint_distance_to_origin(obj.box) < kEgoExclusionRadius + 0.5) continue;
      bool clash = false;
      for (const auto& other : scene.objects) {
        double min_gap = 0.5 * std::hypot(obj.box.length, obj.box.width) +
                         0.5 * std::hypot(other.box.length, other.box.width) + 0.4;
        if (std::hypot(obj.box.center.x - other.box.center.x,
                       obj.box.center.y - other.box.center.y) < min_gap) {
          clash = true;
          break;
        }
      }
      if (!clash) {
        scene.objects.push_back(obj);
        break;
      }
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Dataset generation.

struct GeneratorConfig {
  LidarModel lidar;
  DomainParams domain;
  SceneParams scene;
  std::vector<ClassSpec> classes = default_class_library();
};

struct DatasetSummary {
  int n_scenes = 0;
  std::size_t n_points = 0;
  std::size_t n_labels = 0;
  std::string index_path;
};

inline std::string scene_file_name(int scene_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clouds/scene_%05d.jpcd", scene_id);
  return buf;
}

// Scene i uses seed base_seed + i, so outputs are byte-identical for any
// worker count. Workers write cloud files directly; labels are assembled in
// scene order after the join.
inline DatasetSummary generate_dataset(const std::string& out_dir, int n_scenes,
                                       std::uint64_t base_seed, const GeneratorConfig& cfg,
                                       int workers = 1) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "clouds", ec);
  if (ec) throw std::runtime_error("cannot create dataset directory: " + out_dir);

  RaycastOptions opts;
  opts.point_features = cfg.domain.point_features;
  opts.ground_reflectivity = cfg.domain.ground_reflectivity;

  LidarModel lidar = cfg.lidar;
  lidar.noise = cfg.domain.noise;

  std::vector<std::vector<LabeledBox>> per_scene_labels(static_cast<std::size_t>(n_scenes));
  std::vector<std::size_t> per_scene_points(static_cast<std::size_t>(n_scenes), 0);
  std::vector<std::string> failures(static_cast<std::size_t>(std::max(workers, 1)));

  auto run_range = [&](int worker_id, int begin, int end) {
    try {
      for (int i = begin; i < end; ++i) {
        std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
        SceneDescription scene = make_random_scene(i, seed, cfg.domain, cfg.scene, cfg.classes);
        auto [cloud, boxes] = raycast_scene(scene, lidar, opts);
        std::string rel = scene_file_name(i);
        write_jpcd((fs::path(out_dir) / rel).string(), cloud);
        per_scene_points[static_cast<std::size_t>(i)] = cloud.size();
        for (const auto& b : boxes)
          per_scene_labels[static_cast<std::size_t>(i)].push_back({i, b});
      }
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(worker_id)] = e.what();
    }
  };

  workers = std::max(1, workers);
  if (workers == 1 || n_scenes <= 1) {
    run_range(0, 0, n_scenes);
  } else {
    std::vector<std::thread> pool;
    int chunk = (n_scenes + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      int lo = w * chunk, hi = std::min(n_scenes, (w + 1) * chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, w, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (!f.empty()) throw std::runtime_error("dataset generation failed: " + f);

  DatasetIndex index;
  index.domain = cfg.domain.domain;
  if (cfg.domain.point_features) index.channels = {"intensity", "timestamp"};
  DatasetSummary summary;
  std::vector<LabeledBox> all_labels;
  for (int i = 0; i < n_scenes; ++i) {
    index.files.push_back(scene_file_name(i));
    index.scene_seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
    summary.n_points += per_scene_points[static_cast<std::size_t>(i)];
    const auto& labels = per_scene_labels[static_cast<std::size_t>(i)];
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
  }
  write_labels((fs::path(out_dir) / index.label_file).string(), all_labels);
  write_index((fs::path(out_dir) / "index.json").string(), index);

  summary.n_scenes = n_scenes;
  summary.n_labels = all_labels.size();
  summary.index_path = (fs::path(out_dir) / "index.json").string();
  return summary;
}

}  // namespace s2r
