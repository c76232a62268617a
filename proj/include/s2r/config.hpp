// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "s2r/augmentation.hpp"
#include "s2r/detector.hpp"
#include "s2r/evaluation.hpp"
#include "s2r/geometry.hpp"
#include "s2r/io.hpp"
#include "s2r/simulator.hpp"

namespace s2r {

// Flat configuration with dotted keys. Every key is declared below with its
// type and default; loading rejects unknown keys and serialization is
// canonical (sorted keys, doubles at 17 significant digits), so
// load -> serialize -> load is a fixed point.

// Distinct type so the CLI can map configuration problems to usage errors.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ConfigValue = std::variant<bool, std::int64_t, double, std::vector<double>, std::string>;

class RunConfig {
 public:
  RunConfig() { install_defaults(); }

  static RunConfig from_json_text(const std::string& text, const std::string& origin = "config") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw ConfigError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    RunConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) cfg.set_from_json(it.key(), it.value(), origin);
    return cfg;
  }

  static RunConfig from_file(const std::string& path) {
    return from_json_text(read_file_bytes(path), path);
  }

  std::string to_json_text() const {
    std::string out = "{";
    bool first = true;
    for (const auto& [key, value] : values_) {
      if (!first) out += ",";
      first = false;
      out += "\"" + json_escape(key) + "\":" + value_text(value);
    }
    out += "}\n";
    return out;
  }

  bool get_bool(const std::string& key) const { return std::get<bool>(at(key)); }
  std::int64_t get_int(const std::string& key) const { return std::get<std::int64_t>(at(key)); }
  double get_double(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (std::holds_alternative<std::int64_t>(v))
      return static_cast<double>(std::get<std::int64_t>(v));
    return std::get<double>(v);
  }
  const std::vector<double>& get_array(const std::string& key) const {
    return std::get<std::vector<double>>(at(key));
  }
  std::string get_string(const std::string& key) const { return std::get<std::string>(at(key)); }

  void set_bool(const std::string& key, bool v) { assign(key, ConfigValue(v)); }
  void set_int(const std::string& key, std::int64_t v) { assign(key, ConfigValue(v)); }
  void set_double(const std::string& key, double v) { assign(key, ConfigValue(v)); }

  // ---- Typed views over the flat table ----

  PartitionConfig partition() const {
    PartitionConfig p;
    p.azimuth_bins = static_cast<int>(get_int("partition.azimuth_bins"));
    p.radial_bins = static_cast<int>(get_int("partition.radial_bins"));
    p.radial_edges = get_array("partition.radial_edges");
    p.heading_bins = static_cast<int>(get_int("partition.heading_bins"));
    p.num_classes = static_cast<int>(default_class_library().size());
    if (static_cast<int>(p.radial_edges.size()) != p.radial_bins - 1)
      throw ConfigError("partition.radial_edges must have radial_bins-1 entries");
    return p;
  }

  LidarModel lidar() const {
    LidarModel m;
    m.elevation_angles_deg = LidarModel::linspace_elevations(
        static_cast<int>(get_int("lidar.n_beams")), get_double("lidar.elev_min_deg"),
        get_double("lidar.elev_max_deg"));
    m.azimuth_step_deg = get_double("lidar.azimuth_step_deg");
    m.max_range = get_double("lidar.max_range");
    m.azimuth_steps();  // validates divisibility
    return m;
  }

  SceneParams scene_params() const {
    SceneParams sp;
    sp.min_objects = static_cast<int>(get_int("scene.min_objects"));
    sp.max_objects = static_cast<int>(get_int("scene.max_objects"));
    sp.spawn_r_min = get_double("scene.spawn_r_min");
    sp.spawn_r_max = get_double("scene.spawn_r_max");
    sp.ground_z = get_double("scene.ground_z");
    return sp;
  }

  DomainParams domain_params(Domain domain) const {
    DomainParams dp;
    dp.domain = domain;
    dp.ground_reflectivity = get_double("real.ground_reflectivity");
    if (domain == Domain::kReal) {
      dp.noise.range_sigma = get_double("real.noise_r");
      dp.noise.polar_sigma = get_double("real.noise_theta");
      dp.noise.azimuth_sigma = get_double("real.noise_phi");
      dp.point_features = true;
      dp.deform_strength = get_double("real.deform_strength");
    }
    return dp;
  }

  GeneratorConfig generator(Domain domain) const {
    GeneratorConfig g;
    g.lidar = lidar();
    g.domain = domain_params(domain);
    g.scene = scene_params();
    return g;
  }

  JitterConfig jitter_config() const {
    JitterConfig j;
    j.delta_r = get_double("jitter.delta_r");
    j.delta_theta = get_double("jitter.delta_theta");
    j.delta_phi = get_double("jitter.delta_phi");
    return j;
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.d_feat = static_cast<int>(get_int("model.d_feat"));
    m.num_classes = static_cast<int>(default_class_library().size());
    m.roi_grid = static_cast<int>(get_int("model.roi_grid"));
    m.domain_aware = get_bool("model.domain_aware");
    m.grid.extent = get_double("grid.extent");
    m.grid.cell = get_double("grid.cell");
    m.obj_bias_init = get_double("model.obj_bias_init");
    return m;
  }

  LossWeights loss_weights() const {
    LossWeights w;
    w.lambda = get_double("loss.lambda");
    w.omega_real = get_double("loss.omega_real");
    w.omega_sim = get_double("loss.omega_sim");
    return w;
  }

  DetectionLossConfig detection_loss_config() const {
    DetectionLossConfig c;
    c.focal_alpha = get_double("loss.focal_alpha");
    c.focal_gamma = get_double("loss.focal_gamma");
    c.smooth_l1_beta = get_double("loss.smooth_l1_beta");
    return c;
  }

  MatchConfig match_config() const {
    MatchConfig m;
    m.thresholds = get_array("eval.thresholds");
    m.score_resolution = get_double("eval.score_resolution");
    m.validate();
    return m;
  }

 private:
  const ConfigValue& at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
  }

  void assign(const std::string& key, ConfigValue v) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    if (it->second.index() != v.index()) {
      // allow int literals for double keys
      if (std::holds_alternative<double>(it->second) && std::holds_alternative<std::int64_t>(v))
        v = ConfigValue(static_cast<double>(std::get<std::int64_t>(v)));
      else
        throw ConfigError("config key " + key + " has the wrong type");
    }
    it->second = std::move(v);
  }

  void set_from_json(const std::string& key, const nlohmann::json& j, const std::string& origin) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin + ": unknown config key: " + key);
    try {
      if (j.is_boolean())
        assign(key, ConfigValue(j.get<bool>()));
      else if (j.is_number_integer())
        assign(key, ConfigValue(j.get<std::int64_t>()));
      else if (j.is_number_float())
        assign(key, ConfigValue(j.get<double>()));
      else if (j.is_string())
        assign(key, ConfigValue(j.get<std::string>()));
      else if (j.is_array())
        assign(key, ConfigValue(j.get<std::vector<double>>()));
      else
        throw std::runtime_error("unsupported value type");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(origin + ": key " + key + ": " + e.what());
    }
  }

  static std::string value_text(const ConfigValue& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
    if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
    if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
    if (std::holds_alternative<std::string>(v))
      return "\"" + json_escape(std::get<std::string>(v)) + "\"";
    const auto& arr = std::get<std::vector<double>>(v);
    std::string out = "[";
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (i) out += ",";
      out += format_double(arr[i]);
    }
    return out + "]";
  }

  void install_defaults() {
    auto B = [&](const char* k, bool v) { values_.emplace(k, ConfigValue(v)); };
    auto I = [&](const char* k, std::int64_t v) { values_.emplace(k, ConfigValue(v)); };
    auto D = [&](const char* k, double v) { values_.emplace(k, ConfigValue(v)); };
    auto A = [&](const char* k, std::vector<double> v) {
      values_.emplace(k, ConfigValue(std::move(v)));
    };

    D("bank.momentum", 0.9);
    I("bank.warmup_iterations", 0);  // 0 = one alternation pass over the real subset

    D("grid.extent", 24.0);
    D("grid.cell", 1.0);

    D("jitter.delta_r", 0.01);
    D("jitter.delta_theta", 0.0001);
    D("jitter.delta_phi", 0.0001);

    I("lidar.n_beams", 16);
    D("lidar.elev_min_deg", -24.0);
    D("lidar.elev_max_deg", 2.0);
    D("lidar.azimuth_step_deg", 1.0);
    D("lidar.max_range", 60.0);

    D("loss.lambda", 0.1);
    D("loss.omega_real", 1.0);
    D("loss.omega_sim", 0.1);
    D("loss.focal_alpha", 0.25);
    D("loss.focal_gamma", 2.0);
    D("loss.smooth_l1_beta", 1.0);

    I("model.d_feat", 32);
    I("model.roi_grid", 4);
    B("model.domain_aware", true);
    D("model.obj_bias_init", -4.0);

    I("partition.azimuth_bins", 8);
    I("partition.radial_bins", 4);
    A("partition.radial_edges", {5.0, 15.0, 35.0});
    I("partition.heading_bins", 32);

    D("real.noise_r", 0.05);
    D("real.noise_theta", 0.002);
    D("real.noise_phi", 0.002);
    D("real.deform_strength", 0.2);
    D("real.ground_reflectivity", 0.2);

    I("scene.min_objects", 4);
    I("scene.max_objects", 10);
    D("scene.spawn_r_min", 4.5);
    D("scene.spawn_r_max", 21.0);
    D("scene.ground_z", -1.8);

    I("train.iterations", 1500);
    D("train.lr", 0.02);
    D("train.momentum", 0.9);
    B("train.use_sim_data", true);
    B("train.use_sma", true);
    B("train.use_jitter", true);
    D("train.sim_fraction", 1.0);

    A("eval.thresholds", {0.5, 1.0, 2.0, 4.0});
    D("eval.score_resolution", 0.0);
    D("eval.score_threshold", 0.05);
    D("eval.nms_radius", 1.0);

    I("ablate.sim_scenes", 800);
    I("ablate.real_scenes", 500);
    I("ablate.val_scenes", 120);
    I("ablate.real_subset_div", 40);
    D("ablate.margin_over_real", 2.0);
    D("ablate.margin_half_sim", 1.5);
    I("corner.class_id", 3);
    D("corner.min_class_ap", 5.0);
    D("corner.max_other_drop", 5.0);
  }

  std::map<std::string, ConfigValue> values_;
};

// ---------------------------------------------------------------------------
// Run manifest: resolved config, seed and digests of produced artifacts, so
// any output can be regenerated and verified byte-for-byte.

struct ManifestEntry {
  std::string path;    // relative to the manifest's directory
  std::string digest;  // fnv1a-64 hex of the file bytes
};

inline std::string manifest_json(const std::string& command, const RunConfig& cfg,
                                 std::uint64_t seed,
                                 const std::vector<ManifestEntry>& outputs) {
  std::string cfg_text = cfg.to_json_text();
  if (!cfg_text.empty() && cfg_text.back() == '\n') cfg_text.pop_back();
  std::string out = "{\"command\":\"" + json_escape(command) + "\"";
  out += ",\"config\":" + cfg_text;
  out += ",\"outputs\":[";
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (i) out += ",";
    out += "{\"digest\":\"" + outputs[i].digest + "\",\"path\":\"" +
           json_escape(outputs[i].path) + "\"}";
  }
  out += "],\"seed\":" + std::to_string(seed) + "}\n";
  return out;
}

}  // namespace s2r
