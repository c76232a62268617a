// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "s2r/config.hpp"

using namespace s2r;

TEST_CASE("defaults carry the pinned hyperparameters", "[config]") {
  RunConfig cfg;
  REQUIRE(cfg.get_double("loss.lambda") == 0.1);
  REQUIRE(cfg.get_double("loss.omega_real") == 1.0);
  REQUIRE(cfg.get_double("loss.omega_sim") == 0.1);
  REQUIRE(cfg.get_double("jitter.delta_r") == 0.01);
  REQUIRE(cfg.get_double("jitter.delta_theta") == 0.0001);
  REQUIRE(cfg.get_double("jitter.delta_phi") == 0.0001);
  PartitionConfig part = cfg.partition();
  REQUIRE(part.sector_count() == 32);
  REQUIRE(part.heading_bins == 32);
  REQUIRE(cfg.get_int("model.d_feat") == 32);
  REQUIRE(cfg.get_int("model.roi_grid") == 4);
  REQUIRE(cfg.get_double("bank.momentum") == 0.9);
}

TEST_CASE("unknown keys and wrong types are rejected", "[config]") {
  REQUIRE_THROWS_AS(RunConfig::from_json_text("{\"nope.key\": 1}"), ConfigError);
  REQUIRE_THROWS_AS(RunConfig::from_json_text("{\"loss.lambda\": \"high\"}"), ConfigError);
  REQUIRE_THROWS_AS(RunConfig::from_json_text("not json"), ConfigError);
  REQUIRE_THROWS_AS(RunConfig::from_json_text("[1,2]"), ConfigError);
  REQUIRE_THROWS_AS(RunConfig::from_json_text("{\"model.d_feat\": 1.5}"), ConfigError);
}

TEST_CASE("integer literals are accepted for double keys", "[config]") {
  RunConfig cfg = RunConfig::from_json_text("{\"loss.lambda\": 1}");
  REQUIRE(cfg.get_double("loss.lambda") == 1.0);
}

TEST_CASE("load-serialize-load is a fixed point", "[config]") {
  std::string overrides =
      "{\"grid.cell\": 0.75, \"train.iterations\": 321, \"model.domain_aware\": false,"
      " \"partition.radial_edges\": [4, 12, 30], \"loss.lambda\": 0.30000000000000004}";
  RunConfig cfg = RunConfig::from_json_text(overrides);
  std::string once = cfg.to_json_text();
  RunConfig again = RunConfig::from_json_text(once);
  REQUIRE(again.to_json_text() == once);
  REQUIRE(again.get_double("loss.lambda") == 0.30000000000000004);
  REQUIRE(again.get_bool("model.domain_aware") == false);
  REQUIRE(again.get_array("partition.radial_edges") == std::vector<double>{4, 12, 30});
}

TEST_CASE("typed views validate structure", "[config]") {
  RunConfig cfg = RunConfig::from_json_text("{\"partition.radial_edges\": [1, 2]}");
  REQUIRE_THROWS_AS(cfg.partition(), ConfigError);

  RunConfig bad_step = RunConfig::from_json_text("{\"lidar.azimuth_step_deg\": 0.7}");
  REQUIRE_THROWS_AS(bad_step.lidar(), std::invalid_argument);

  RunConfig ok;
  LidarModel lidar = ok.lidar();
  REQUIRE(lidar.beam_count() == 16);
  REQUIRE(lidar.azimuth_steps() == 360);
  REQUIRE(ok.model_config().num_classes == 4);
  REQUIRE(ok.domain_params(Domain::kReal).point_features);
  REQUIRE_FALSE(ok.domain_params(Domain::kSim).point_features);
  REQUIRE(ok.domain_params(Domain::kSim).noise.active() == false);
}

TEST_CASE("manifest embeds config, seed and digests", "[config]") {
  RunConfig cfg;
  std::string m = manifest_json("gen-sim", cfg, 42, {{"index.json", "00ff00ff00ff00ff"}});
  REQUIRE(m.find("\"command\":\"gen-sim\"") != std::string::npos);
  REQUIRE(m.find("\"seed\":42") != std::string::npos);
  REQUIRE(m.find("\"path\":\"index.json\"") != std::string::npos);
  REQUIRE(m.find("\"digest\":\"00ff00ff00ff00ff\"") != std::string::npos);
  REQUIRE(m.find("\"loss.lambda\":0.1") != std::string::npos);
}
