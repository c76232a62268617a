// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2r/geometry.hpp"
#include "s2r/io.hpp"
#include "s2r/pointcloud.hpp"
#include "s2r/rng.hpp"

namespace s2r {

// A pooled per-object feature vector together with the grid cell it belongs
// to in the (sector, heading bin, class) partition.
struct ObjectFeature {
  std::vector<double> values;
  SectorIndex index;
  Domain domain = Domain::kSim;
};

// Momentum-averaged feature table over (sector, heading bin, class), one per
// source domain. Entries are random-initialized but the first update to an
// entry overwrites it entirely; alignment only ever reads entries that have
// been written at least once.
class MemoryBank {
 public:
  MemoryBank(const PartitionConfig& partition, int feature_dim, double momentum,
             Domain source_domain, std::uint64_t init_seed = 0)
      : partition_(partition),
        feature_dim_(feature_dim),
        momentum_(momentum),
        source_domain_(source_domain) {
    if (momentum <= 0.0 || momentum >= 1.0)
      throw std::invalid_argument("memory momentum must be in (0, 1)");
    std::size_t cells = cell_count();
    entries_.resize(cells * static_cast<std::size_t>(feature_dim_));
    valid_.assign(cells, false);
    update_count_.assign(cells, 0);
    RngStream rng = make_stream(init_seed, 0x6D656D6Full);
    for (auto& v : entries_) v = 0.01 * rng.gaussian();
  }

  const PartitionConfig& partition() const { return partition_; }
  int feature_dim() const { return feature_dim_; }
  double momentum() const { return momentum_; }
  Domain source_domain() const { return source_domain_; }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(partition_.sector_count()) *
           static_cast<std::size_t>(partition_.heading_bins) *
           static_cast<std::size_t>(partition_.num_classes);
  }

  std::size_t cell_of(const SectorIndex& idx) const {
    if (idx.sector < 0 || idx.sector >= partition_.sector_count() || idx.heading_bin < 0 ||
        idx.heading_bin >= partition_.heading_bins || idx.class_id < 0 ||
        idx.class_id >= partition_.num_classes)
      throw std::out_of_range("memory index outside the partition grid");
    return (static_cast<std::size_t>(idx.sector) *
                static_cast<std::size_t>(partition_.heading_bins) +
            static_cast<std::size_t>(idx.heading_bin)) *
               static_cast<std::size_t>(partition_.num_classes) +
           static_cast<std::size_t>(idx.class_id);
  }

  bool valid(const SectorIndex& idx) const { return valid_[cell_of(idx)]; }
  std::uint32_t updates(const SectorIndex& idx) const { return update_count_[cell_of(idx)]; }

  const double* entry(const SectorIndex& idx) const {
    return entries_.data() + cell_of(idx) * static_cast<std::size_t>(feature_dim_);
  }

  void update(const ObjectFeature& feat) {
    if (feat.domain != source_domain_)
      throw std::invalid_argument("feature domain does not match the bank's source domain");
    if (static_cast<int>(feat.values.size()) != feature_dim_)
      throw std::invalid_argument("feature dimension does not match the bank");
    std::size_t cell = cell_of(feat.index);
    double* e = entries_.data() + cell * static_cast<std::size_t>(feature_dim_);
    if (valid_[cell]) {
      for (int j = 0; j < feature_dim_; ++j)
        e[j] = momentum_ * e[j] + (1.0 - momentum_) * feat.values[static_cast<std::size_t>(j)];
    } else {
      for (int j = 0; j < feature_dim_; ++j) e[j] = feat.values[static_cast<std::size_t>(j)];
      valid_[cell] = true;
    }
    ++update_count_[cell];
  }

  // Raw state accessors for checkpointing.
  const std::vector<double>& raw_entries() const { return entries_; }
  const std::vector<std::uint32_t>& raw_update_counts() const { return update_count_; }
  std::vector<std::uint8_t> raw_valid() const {
    return std::vector<std::uint8_t>(valid_.begin(), valid_.end());
  }
  void restore(std::vector<double> entries, std::vector<std::uint8_t> valid,
               std::vector<std::uint32_t> counts) {
    if (entries.size() != entries_.size() || valid.size() != valid_.size() ||
        counts.size() != update_count_.size())
      throw std::invalid_argument("memory bank restore: shape mismatch");
    entries_ = std::move(entries);
    valid_.assign(valid.begin(), valid.end());
    update_count_ = std::move(counts);
  }

 private:
  PartitionConfig partition_;
  int feature_dim_;
  double momentum_;
  Domain source_domain_;
  std::vector<double> entries_;       // cell-major, feature_dim per cell
  std::vector<bool> valid_;
  std::vector<std::uint32_t> update_count_;
};

// ---------------------------------------------------------------------------
// Alignment loss: mean squared error between pooled object features and the
// memory entries at the same index. Features whose entry has never been
// written are skipped, and the normalizer counts only the included features.
// Memory entries receive no gradient.

struct SmaResult {
  double loss = 0.0;
  std::vector<std::vector<double>> feature_grads;  // empty vector = skipped feature
  int included = 0;
};

inline SmaResult sma_loss(const MemoryBank& bank, const std::vector<ObjectFeature>& feats) {
  SmaResult res;
  res.feature_grads.resize(feats.size());
  const int d = bank.feature_dim();

  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (static_cast<int>(feats[i].values.size()) != d)
      throw std::invalid_argument("feature dimension does not match the bank");
    if (bank.valid(feats[i].index)) used.push_back(i);
  }
  res.included = static_cast<int>(used.size());
  if (used.empty()) return res;

  const double norm = 1.0 / (static_cast<double>(res.included) * static_cast<double>(d));
  double sq_sum = 0.0;
  for (std::size_t i : used) {
    const double* e = bank.entry(feats[i].index);
    auto& g = res.feature_grads[i];
    g.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      double diff = feats[i].values[static_cast<std::size_t>(j)] - e[j];
      sq_sum += diff * diff;
      g[static_cast<std::size_t>(j)] = 2.0 * diff * norm;
    }
  }
  res.loss = sq_sum * norm;
  return res;
}

// ---------------------------------------------------------------------------
// Bidirectional step with warm-up gating.

struct WarmupState {
  std::int64_t iteration = 0;
  std::int64_t threshold = 0;

  bool warm() const { return iteration >= threshold; }
};

struct BidirectionalResult {
  double loss = 0.0;
  std::vector<std::vector<double>> real_feature_grads;  // vs. the sim bank
  std::vector<std::vector<double>> sim_feature_grads;   // vs. the real bank
};

// Updates each bank from its own domain's features (always, including during
// warm-up), then after warm-up aligns each domain against the other bank:
// sim features pull toward real memories and vice versa. Bank updates see
// detached values; gradients flow only to the features.
inline BidirectionalResult bidirectional_step(MemoryBank& real_bank, MemoryBank& sim_bank,
                                              const std::vector<ObjectFeature>& real_feats,
                                              const std::vector<ObjectFeature>& sim_feats,
                                              WarmupState& warmup) {
  bool warm = warmup.warm();
  ++warmup.iteration;

  for (const auto& f : real_feats) real_bank.update(f);
  for (const auto& f : sim_feats) sim_bank.update(f);

  BidirectionalResult res;
  res.real_feature_grads.resize(real_feats.size());
  res.sim_feature_grads.resize(sim_feats.size());
  if (!warm) return res;

  SmaResult sim_vs_real = sma_loss(real_bank, sim_feats);
  SmaResult real_vs_sim = sma_loss(sim_bank, real_feats);
  res.loss = sim_vs_real.loss + real_vs_sim.loss;
  res.sim_feature_grads = std::move(sim_vs_real.feature_grads);
  res.real_feature_grads = std::move(real_vs_sim.feature_grads);
  return res;
}

// ---------------------------------------------------------------------------
// Debug dump of grid coverage: one record per (sector, heading, class) cell.

inline std::string memory_coverage_json(const MemoryBank& bank) {
  const auto& part = bank.partition();
  std::string out = "{\"cells\":[";
  bool first = true;
  std::size_t valid_cells = 0;
  for (int sc = 0; sc < part.sector_count(); ++sc) {
    for (int hb = 0; hb < part.heading_bins; ++hb) {
      for (int cl = 0; cl < part.num_classes; ++cl) {
        SectorIndex idx{sc, hb, cl};
        bool v = bank.valid(idx);
        if (v) ++valid_cells;
        double norm_sq = 0.0;
        const double* e = bank.entry(idx);
        for (int j = 0; j < bank.feature_dim(); ++j) norm_sq += e[j] * e[j];
        if (!first) out += ",";
        first = false;
        out += "{\"class\":" + std::to_string(cl) +
               ",\"heading\":" + std::to_string(hb) +
               ",\"norm\":" + format_double(std::sqrt(norm_sq)) +
               ",\"sector\":" + std::to_string(sc) +
               ",\"updates\":" + std::to_string(bank.updates(idx)) +
               ",\"valid\":" + (v ? "true" : "false") + "}";
      }
    }
  }
  out += "],\"domain\":\"";
  out += domain_name(bank.source_domain());
  out += "\",\"feature_dim\":" + std::to_string(bank.feature_dim());
  out += ",\"valid_cells\":" + std::to_string(valid_cells);
  out += ",\"total_cells\":" + std::to_string(bank.cell_count()) + "}\n";
  return out;
}

}  // namespace s2r
