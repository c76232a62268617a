// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "s2r/simulator.hpp"
#include "s2r/trainer.hpp"

using namespace s2r;
namespace fs = std::filesystem;

namespace {

LidarModel test_lidar(std::vector<double> elevations, double step = 1.0,
                      double max_range = 60.0) {
  LidarModel m;
  m.elevation_angles_deg = std::move(elevations);
  m.azimuth_step_deg = step;
  m.max_range = max_range;
  return m;
}

SceneDescription empty_scene(std::uint64_t seed = 1) {
  SceneDescription s;
  s.scene_id = 0;
  s.ground_z = -1.8;
  s.seed = seed;
  return s;
}

ObjectSpec cuboid_at(double x, double y, double l, double w, double h, double yaw = 0.0,
                     int cls = 0) {
  ObjectSpec obj;
  obj.shape = ShapeKind::kCuboid;
  obj.box.center = {x, y, -1.8 + h / 2};
  obj.box.length = l;
  obj.box.width = w;
  obj.box.height = h;
  obj.box.yaw_deg = yaw;
  obj.box.category_id = cls;
  obj.reflectivity = 0.6;
  return obj;
}

}  // namespace

TEST_CASE("single downward beam over flat ground lands at h/sin(e)", "[simulator]") {
  SceneDescription scene = empty_scene();
  LidarModel lidar = test_lidar({-10.0});
  auto [cloud, labels] = raycast_scene(scene, lidar);

  REQUIRE(labels.empty());
  REQUIRE(cloud.size() == 360);  // every azimuth returns
  double expected_r = 1.8 / std::sin(deg_to_rad(10.0));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint p = cloud.point(i);
    REQUIRE(std::abs(p.z - (-1.8)) < 1e-9);
    double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    REQUIRE(std::abs(r - expected_r) < 1e-9);
  }
}

TEST_CASE("upward beams never return from an empty scene", "[simulator]") {
  auto [cloud, labels] = raycast_scene(empty_scene(), test_lidar({5.0, 15.0}));
  REQUIRE(cloud.size() == 0);
  REQUIRE(labels.empty());
}

TEST_CASE("object behind max_range produces no points and no label", "[simulator]") {
  SceneDescription scene = empty_scene();
  scene.objects.push_back(cuboid_at(100.0, 0.0, 4, 2, 1.5));
  LidarModel lidar = test_lidar({0.0}, 1.0, 60.0);
  auto [cloud, labels] = raycast_scene(scene, lidar);
  REQUIRE(labels.empty());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    REQUIRE(cloud.point(i).x < 90.0);
}

TEST_CASE("object points lie inside the labeled box", "[simulator]") {
  SceneDescription scene = empty_scene();
  scene.objects.push_back(cuboid_at(10.0, 0.0, 4, 2, 1.5, 25.0, 1));
  LidarModel lidar = test_lidar(LidarModel::linspace_elevations(16, -24, 2));
  auto [cloud, labels] = raycast_scene(scene, lidar);

  REQUIRE(labels.size() == 1);
  std::size_t object_points = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint p = cloud.point(i);
    if (std::abs(p.z - scene.ground_z) < 1e-9) continue;  // ground return
    REQUIRE(point_in_box(p, labels[0], 1e-6));
    ++object_points;
  }
  REQUIRE(object_points > 0);
}

TEST_CASE("cylinder intersection from straight ahead", "[simulator]") {
  SceneDescription scene = empty_scene();
  ObjectSpec ped;
  ped.shape = ShapeKind::kCylinder;
  ped.box.center = {10.0, 0.0, -1.8 + 1.1};  // tall enough to cross z = 0
  ped.box.length = 0.7;
  ped.box.width = 0.7;
  ped.box.height = 2.2;
  ped.box.category_id = 2;
  ped.reflectivity = 0.8;
  scene.objects.push_back(ped);

  LidarModel lidar = test_lidar({0.0});
  RaycastOptions opts;
  opts.point_features = true;
  auto [cloud, labels] = raycast_scene(scene, lidar, opts);

  REQUIRE(labels.size() == 1);
  bool found = false;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint p = cloud.point(i);
    if (std::abs(p.y) < 1e-9 && p.x > 0) {
      // Ray along +x hits the tube wall head on.
      REQUIRE(p.x == Catch::Approx(10.0 - 0.35).margin(1e-9));
      REQUIRE(cloud.feature(i, 0) == Catch::Approx(0.8).margin(1e-12));
      found = true;
    }
  }
  REQUIRE(found);
}

TEST_CASE("raycast respects max range and ray-count bounds", "[simulator]") {
  DomainParams dp;
  SceneParams sp;
  auto classes = default_class_library();
  LidarModel lidar = test_lidar(LidarModel::linspace_elevations(8, -20, 2), 2.0, 40.0);

  for (int trial = 0; trial < 5; ++trial) {
    SceneDescription scene = make_random_scene(trial, 1000 + trial, dp, sp, classes);
    auto [cloud, labels] = raycast_scene(scene, lidar);
    REQUIRE(cloud.size() <= static_cast<std::size_t>(8 * 180));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CartesianPoint p = cloud.point(i);
      REQUIRE(std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z) <= 40.0 + 1e-9);
    }
  }
}

TEST_CASE("every label has a point and object points have one owner", "[simulator]") {
  DomainParams dp;  // noiseless, undeformed
  SceneParams sp;
  auto classes = default_class_library();
  LidarModel lidar = test_lidar(LidarModel::linspace_elevations(16, -24, 2));

  for (int trial = 0; trial < 4; ++trial) {
    SceneDescription scene = make_random_scene(trial, 77 + trial, dp, sp, classes);
    auto [cloud, labels] = raycast_scene(scene, lidar);
    for (const auto& box : labels) REQUIRE_FALSE(points_in_box(cloud, box, 1e-6).empty());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CartesianPoint p = cloud.point(i);
      if (std::abs(p.z - scene.ground_z) < 1e-9) continue;
      int owners = 0;
      for (const auto& box : labels)
        if (point_in_box(p, box, 1e-6)) ++owners;
      REQUIRE(owners == 1);
    }
  }
}

TEST_CASE("zero-noise raycast is bitwise deterministic", "[simulator]") {
  DomainParams dp;
  SceneParams sp;
  auto classes = default_class_library();
  SceneDescription scene = make_random_scene(0, 4242, dp, sp, classes);
  LidarModel lidar = test_lidar(LidarModel::linspace_elevations(16, -24, 2));
  auto [c1, l1] = raycast_scene(scene, lidar);
  auto [c2, l2] = raycast_scene(scene, lidar);
  REQUIRE(encode_jpcd(c1) == encode_jpcd(c2));
  REQUIRE(l1.size() == l2.size());
}

TEST_CASE("range noise std lands within 5 percent", "[simulator]") {
  SceneDescription scene = empty_scene(555);
  // 16 descending beams, 0.05 deg azimuth: 115200 ground returns.
  LidarModel lidar = test_lidar(LidarModel::linspace_elevations(16, -25, -5), 0.05, 80.0);
  lidar.noise.range_sigma = 0.03;

  auto [cloud, labels] = raycast_scene(scene, lidar);
  REQUIRE(cloud.size() == static_cast<std::size_t>(16 * 7200));

  // True range recovered from the known beam table: ray i belongs to beam
  // i / steps because rays scan azimuth-major per beam.
  int steps = lidar.azimuth_steps();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CartesianPoint p = cloud.point(i);
    double elev = lidar.elevation_angles_deg[i / static_cast<std::size_t>(steps)];
    double true_r = -scene.ground_z / std::sin(deg_to_rad(-elev));
    double dr = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z) - true_r;
    sum += dr;
    sum_sq += dr * dr;
  }
  double n = static_cast<double>(cloud.size());
  double mean = sum / n;
  double stddev = std::sqrt(sum_sq / n - mean * mean);
  REQUIRE(std::abs(stddev - 0.03) < 0.05 * 0.03);
}

TEST_CASE("pseudo-real features: intensity in unit range, sim has none", "[simulator]") {
  DomainParams dp;
  dp.domain = Domain::kReal;
  dp.point_features = true;
  SceneParams sp;
  auto classes = default_class_library();
  SceneDescription scene = make_random_scene(0, 31337, dp, sp, classes);
  LidarModel lidar = test_lidar(LidarModel::linspace_elevations(8, -20, 0));
  RaycastOptions opts;
  opts.point_features = true;

  auto [cloud, labels] = raycast_scene(scene, lidar, opts);
  REQUIRE(cloud.channel_count() == 2);
  REQUIRE(cloud.size() > 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    REQUIRE(cloud.feature(i, 0) >= 0.0);
    REQUIRE(cloud.feature(i, 0) <= 1.0);
    REQUIRE(cloud.feature(i, 1) >= 0.0);
    REQUIRE(cloud.feature(i, 1) < 0.05);
  }

  SceneDescription sim_scene = make_random_scene(0, 31337, DomainParams{}, sp, classes);
  auto [sim_cloud, sim_labels] = raycast_scene(sim_scene, test_lidar({-10.0}));
  REQUIRE(sim_cloud.channel_count() == 0);
}

TEST_CASE("timestamps are azimuth-proportional over the sweep", "[simulator]") {
  SceneDescription scene = empty_scene();
  LidarModel lidar = test_lidar({-10.0}, 1.0);
  RaycastOptions opts;
  opts.point_features = true;
  auto [cloud, labels] = raycast_scene(scene, lidar, opts);
  REQUIRE(cloud.size() == 360);
  for (std::size_t k = 0; k < cloud.size(); ++k)
    REQUIRE(cloud.feature(k, 1) ==
            Catch::Approx(0.05 * static_cast<double>(k) / 360.0).margin(1e-12));
}

TEST_CASE("scenes violating the ego exclusion zone are rejected", "[simulator]") {
  SceneDescription scene = empty_scene();
  scene.objects.push_back(cuboid_at(1.0, 0.0, 4, 2, 1.5));
  REQUIRE_THROWS_WITH(raycast_scene(scene, test_lidar({-10.0})),
                      Catch::Matchers::ContainsSubstring("ego exclusion"));
}

TEST_CASE("class deformation is a stable per-class per-axis factor", "[simulator]") {
  DomainParams dp;
  dp.domain = Domain::kReal;
  dp.deform_strength = 0.2;
  REQUIRE(class_deform_factor(dp, 0, 0) == class_deform_factor(dp, 0, 0));
  bool any_off_one = false;
  for (int cls = 0; cls < 4; ++cls)
    for (int axis = 0; axis < 3; ++axis) {
      double f = class_deform_factor(dp, cls, axis);
      REQUIRE(f >= 0.8);
      REQUIRE(f <= 1.2);
      if (std::abs(f - 1.0) > 0.01) any_off_one = true;
    }
  REQUIRE(any_off_one);

  DomainParams plain;
  REQUIRE(class_deform_factor(plain, 1, 2) == 1.0);
}

TEST_CASE("generate_dataset writes a loadable deterministic dataset", "[simulator]") {
  std::string root = (fs::temp_directory_path() / "s2r_gen_test").string();
  fs::remove_all(root);
  GeneratorConfig cfg;
  cfg.lidar = test_lidar(LidarModel::linspace_elevations(8, -20, 0), 2.0);

  SECTION("zero scenes produce an empty index and no clouds") {
    auto summary = generate_dataset(root + "/empty", 0, 5, cfg);
    REQUIRE(summary.n_scenes == 0);
    DatasetIndex idx = read_index(root + "/empty/index.json");
    REQUIRE(idx.files.empty());
    REQUIRE(read_labels(root + "/empty/labels.jsonl").empty());
  }

  SECTION("same seed twice is byte-identical; workers do not matter") {
    generate_dataset(root + "/a", 12, 99, cfg, 1);
    generate_dataset(root + "/b", 12, 99, cfg, 1);
    generate_dataset(root + "/c", 12, 99, cfg, 8);
    for (const auto& rel :
         {std::string("index.json"), std::string("labels.jsonl"), scene_file_name(0),
          scene_file_name(7), scene_file_name(11)}) {
      std::string da = file_digest(root + "/a/" + rel);
      REQUIRE(da == file_digest(root + "/b/" + rel));
      REQUIRE(da == file_digest(root + "/c/" + rel));
    }

    Dataset ds = load_dataset(root + "/a");
    REQUIRE(ds.samples.size() == 12);
    REQUIRE(ds.domain == Domain::kSim);
    bool any_boxes = false;
    for (const auto& s : ds.samples)
      if (!s.boxes.empty()) any_boxes = true;
    REQUIRE(any_boxes);
  }
}
