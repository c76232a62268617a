// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2r/alignment.hpp"
#include "s2r/detector.hpp"
#include "s2r/io.hpp"

namespace s2r {

// Parameter checkpoint: a binary blob of named float32 tensors plus a JSON
// manifest describing names, shapes and sharing flags. Model weights carry
// their scope flag; memory-bank state rides along flagged "state" so trained
// artifacts are self-contained.

struct NamedTensor {
  std::string name;
  std::string flag;  // "shared" | "sim" | "real" | "state"
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  nlohmann::json meta;  // model + partition reconstruction info

  NamedTensor* find(const std::string& name) {
    for (auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

inline void checkpoint_add_model(Checkpoint& ck, const DetectorModel& model) {
  for (const auto& p : model.params()) {
    NamedTensor t;
    t.name = p.name;
    t.flag = param_scope_name(p.scope);
    t.shape = p.shape;
    t.data.assign(p.value.begin(), p.value.end());
    ck.tensors.push_back(std::move(t));
  }
  const ModelConfig& cfg = model.config();
  ck.meta["model"] = {{"d_feat", cfg.d_feat},
                      {"num_classes", cfg.num_classes},
                      {"roi_grid", cfg.roi_grid},
                      {"domain_aware", cfg.domain_aware},
                      {"grid_extent", cfg.grid.extent},
                      {"grid_cell", cfg.grid.cell},
                      {"obj_bias_init", cfg.obj_bias_init}};
}

inline void checkpoint_add_bank(Checkpoint& ck, const MemoryBank& bank,
                                const std::string& prefix) {
  const auto& part = bank.partition();
  std::vector<int> grid_shape = {part.sector_count(), part.heading_bins, part.num_classes};
  NamedTensor entries;
  entries.name = prefix + ".entries";
  entries.flag = "state";
  entries.shape = grid_shape;
  entries.shape.push_back(bank.feature_dim());
  entries.data.assign(bank.raw_entries().begin(), bank.raw_entries().end());
  ck.tensors.push_back(std::move(entries));

  NamedTensor valid;
  valid.name = prefix + ".valid";
  valid.flag = "state";
  valid.shape = grid_shape;
  for (auto v : bank.raw_valid()) valid.data.push_back(static_cast<float>(v));
  ck.tensors.push_back(std::move(valid));

  NamedTensor counts;
  counts.name = prefix + ".update_count";
  counts.flag = "state";
  counts.shape = grid_shape;
  for (auto v : bank.raw_update_counts()) counts.data.push_back(static_cast<float>(v));
  ck.tensors.push_back(std::move(counts));

  ck.meta["partition"] = {{"azimuth_bins", part.azimuth_bins},
                          {"radial_bins", part.radial_bins},
                          {"radial_edges", part.radial_edges},
                          {"heading_bins", part.heading_bins},
                          {"num_classes", part.num_classes}};
  ck.meta["bank"][prefix] = {{"momentum", bank.momentum()},
                             {"domain", domain_name(bank.source_domain())}};
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& bin_path,
                            const std::string& manifest_path) {
  std::string blob = "S2RC";
  detail::put_u32(blob, 1u);
  std::string manifest = "{\"meta\":" + ck.meta.dump() + ",\"tensors\":[";
  std::size_t offset = blob.size();
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    const auto& t = ck.tensors[i];
    if (i) manifest += ",";
    manifest += "{\"count\":" + std::to_string(t.data.size());
    manifest += ",\"flag\":\"" + t.flag + "\"";
    manifest += ",\"name\":\"" + json_escape(t.name) + "\"";
    manifest += ",\"offset\":" + std::to_string(offset);
    manifest += ",\"shape\":[";
    for (std::size_t k = 0; k < t.shape.size(); ++k) {
      if (k) manifest += ",";
      manifest += std::to_string(t.shape[k]);
    }
    manifest += "]}";
    for (float f : t.data) detail::put_f32(blob, f);
    offset = blob.size();
  }
  manifest += "],\"version\":1}\n";
  write_file_bytes(bin_path, blob);
  write_file_bytes(manifest_path, manifest);
}

inline Checkpoint load_checkpoint(const std::string& bin_path,
                                  const std::string& manifest_path) {
  std::string blob = read_file_bytes(bin_path);
  detail::ByteReader header(blob, bin_path);
  if (header.str(4) != "S2RC") throw std::runtime_error("bad checkpoint magic: " + bin_path);
  if (header.u32() != 1) throw std::runtime_error("unsupported checkpoint version: " + bin_path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(manifest_path));
  } catch (const std::exception& e) {
    throw std::runtime_error(manifest_path + ": " + e.what());
  }
  Checkpoint ck;
  ck.meta = j.at("meta");
  for (const auto& tj : j.at("tensors")) {
    NamedTensor t;
    t.name = tj.at("name").get<std::string>();
    t.flag = tj.at("flag").get<std::string>();
    t.shape = tj.at("shape").get<std::vector<int>>();
    std::size_t count = tj.at("count").get<std::size_t>();
    std::size_t offset = tj.at("offset").get<std::size_t>();
    if (offset + count * 4 > blob.size())
      throw std::runtime_error("checkpoint tensor out of bounds: " + t.name);
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits =
          static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + i * 4])) |
          static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + i * 4 + 1])) << 8 |
          static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + i * 4 + 2])) << 16 |
          static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + i * 4 + 3])) << 24;
      t.data[i] = std::bit_cast<float>(bits);
    }
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

inline ModelConfig model_config_from_checkpoint(const Checkpoint& ck) {
  const auto& m = ck.meta.at("model");
  ModelConfig cfg;
  cfg.d_feat = m.at("d_feat").get<int>();
  cfg.num_classes = m.at("num_classes").get<int>();
  cfg.roi_grid = m.at("roi_grid").get<int>();
  cfg.domain_aware = m.at("domain_aware").get<bool>();
  cfg.grid.extent = m.at("grid_extent").get<double>();
  cfg.grid.cell = m.at("grid_cell").get<double>();
  cfg.obj_bias_init = m.at("obj_bias_init").get<double>();
  return cfg;
}

inline PartitionConfig partition_from_checkpoint(const Checkpoint& ck) {
  const auto& p = ck.meta.at("partition");
  PartitionConfig part;
  part.azimuth_bins = p.at("azimuth_bins").get<int>();
  part.radial_bins = p.at("radial_bins").get<int>();
  part.radial_edges = p.at("radial_edges").get<std::vector<double>>();
  part.heading_bins = p.at("heading_bins").get<int>();
  part.num_classes = p.at("num_classes").get<int>();
  return part;
}

inline void restore_model(DetectorModel& model, const Checkpoint& ck) {
  for (auto& p : model.params()) {
    const NamedTensor* t = nullptr;
    for (const auto& cand : ck.tensors)
      if (cand.name == p.name) {
        t = &cand;
        break;
      }
    if (!t) throw std::runtime_error("checkpoint missing tensor: " + p.name);
    if (t->data.size() != p.numel())
      throw std::runtime_error("checkpoint tensor size mismatch: " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i)
      p.value[i] = static_cast<double>(t->data[i]);
  }
}

inline MemoryBank restore_bank(const Checkpoint& ck, const std::string& prefix) {
  Checkpoint& mut = const_cast<Checkpoint&>(ck);
  NamedTensor* entries = mut.find(prefix + ".entries");
  NamedTensor* valid = mut.find(prefix + ".valid");
  NamedTensor* counts = mut.find(prefix + ".update_count");
  if (!entries || !valid || !counts)
    throw std::runtime_error("checkpoint missing memory bank: " + prefix);
  PartitionConfig part = partition_from_checkpoint(ck);
  const auto& meta = ck.meta.at("bank").at(prefix);
  MemoryBank bank(part, entries->shape.back(), meta.at("momentum").get<double>(),
                  domain_from_name(meta.at("domain").get<std::string>()));
  std::vector<double> e(entries->data.begin(), entries->data.end());
  std::vector<std::uint8_t> v;
  for (float f : valid->data) v.push_back(f != 0.0f ? 1 : 0);
  std::vector<std::uint32_t> c;
  for (float f : counts->data) c.push_back(static_cast<std::uint32_t>(f));
  bank.restore(std::move(e), std::move(v), std::move(c));
  return bank;
}

}  // namespace s2r
