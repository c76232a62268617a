// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2r/alignment.hpp"
#include "s2r/augmentation.hpp"
#include "s2r/config.hpp"
#include "s2r/detector.hpp"
#include "s2r/evaluation.hpp"
#include "s2r/io.hpp"
#include "s2r/pointcloud.hpp"
#include "s2r/rng.hpp"

namespace s2r {

struct TrainSample {
  int scene_id = 0;
  PointCloud cloud;
  std::vector<Box3D> boxes;
};

struct Dataset {
  Domain domain = Domain::kSim;
  std::vector<TrainSample> samples;

  std::vector<LabeledBox> all_labels() const {
    std::vector<LabeledBox> out;
    for (const auto& s : samples)
      for (const auto& b : s.boxes) out.push_back({s.scene_id, b});
    return out;
  }
};

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  DatasetIndex index = read_index((fs::path(dir) / "index.json").string());
  Dataset ds;
  ds.domain = index.domain;
  std::vector<LabeledBox> labels = read_labels((fs::path(dir) / index.label_file).string());

  ds.samples.resize(index.files.size());
  for (std::size_t i = 0; i < index.files.size(); ++i) {
    TrainSample& s = ds.samples[i];
    s.scene_id = static_cast<int>(i);
    s.cloud = read_jpcd((fs::path(dir) / index.files[i]).string());
    s.cloud.set_domain(index.domain);
  }
  for (const auto& lb : labels) {
    if (lb.scene_id < 0 || lb.scene_id >= static_cast<int>(ds.samples.size()))
      throw std::runtime_error(dir + ": label references missing scene " +
                               std::to_string(lb.scene_id));
    ds.samples[static_cast<std::size_t>(lb.scene_id)].boxes.push_back(lb.box);
  }
  return ds;
}

// Keep every `stride`-th scene; scene ids are preserved.
inline Dataset dataset_subset(const Dataset& ds, int stride) {
  Dataset out;
  out.domain = ds.domain;
  for (std::size_t i = 0; i < ds.samples.size(); i += static_cast<std::size_t>(stride))
    out.samples.push_back(ds.samples[i]);
  return out;
}

// Drop all labels of one class (the clouds keep the object's points).
inline Dataset strip_class_labels(const Dataset& ds, int class_id) {
  Dataset out = ds;
  for (auto& s : out.samples) {
    std::vector<Box3D> kept;
    for (const auto& b : s.boxes)
      if (b.category_id != class_id) kept.push_back(b);
    s.boxes = std::move(kept);
  }
  return out;
}

// Truncate to the first `count` scenes (used for partial-simulation rows).
inline Dataset dataset_head(const Dataset& ds, std::size_t count) {
  Dataset out;
  out.domain = ds.domain;
  for (std::size_t i = 0; i < ds.samples.size() && i < count; ++i)
    out.samples.push_back(ds.samples[i]);
  return out;
}

// ---------------------------------------------------------------------------

struct MetricsRow {
  std::int64_t iteration = 0;
  double l_det_real = 0.0;  // unweighted detection loss on a real batch
  double l_det_sim = 0.0;   // unweighted detection loss on a sim batch
  double l_sma = 0.0;
  double total = 0.0;       // omega_real*l_det_real + omega_sim*l_det_sim + lambda*l_sma
};

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iteration,l_det_real,l_det_sim,l_sma,total\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + format_double(r.l_det_real) + "," +
           format_double(r.l_det_sim) + "," + format_double(r.l_sma) + "," +
           format_double(r.total) + "\n";
  }
  return out;
}

struct TrainResult {
  DetectorModel model;
  MemoryBank real_bank;
  MemoryBank sim_bank;
  WarmupState warmup;
  std::vector<MetricsRow> metrics;
  int total_ignored_boxes = 0;
};

namespace detail {

// Deterministic per-epoch sample ordering.
class SampleCursor {
 public:
  SampleCursor(std::size_t count, std::uint64_t seed, std::uint64_t domain_tag)
      : count_(count), seed_(seed), tag_(domain_tag) {
    reshuffle();
  }

  bool empty() const { return count_ == 0; }
  std::int64_t epoch() const { return epoch_; }

  std::size_t next() {
    if (pos_ >= order_.size()) {
      ++epoch_;
      pos_ = 0;
      reshuffle();
    }
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    order_.resize(count_);
    for (std::size_t i = 0; i < count_; ++i) order_[i] = i;
    RngStream rng = make_stream(seed_, 0x6F72646572ull, tag_, static_cast<std::uint64_t>(epoch_));
    deterministic_shuffle(order_, rng);
  }

  std::size_t count_;
  std::uint64_t seed_, tag_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::int64_t epoch_ = 0;
};

}  // namespace detail

// Joint training loop. Batches alternate real/sim in a fixed seeded shuffle;
// each iteration runs one scene through the detector, applies the detection
// loss for its domain and the bidirectional alignment step, and takes one
// SGD step with cosine learning-rate decay. Fully deterministic given the
// seed. Throws on non-finite loss.
inline TrainResult train(const RunConfig& cfg, const Dataset& real_data,
                         const Dataset* sim_data, std::uint64_t seed,
                         const std::function<bool(const Param&)>& trainable = {}) {
  const ModelConfig model_cfg = cfg.model_config();
  const PartitionConfig partition = cfg.partition();
  const LossWeights weights = cfg.loss_weights();
  const DetectionLossConfig det_cfg = cfg.detection_loss_config();
  const JitterConfig jitter_cfg = cfg.jitter_config();
  const bool use_sim = cfg.get_bool("train.use_sim_data") && sim_data != nullptr &&
                       !sim_data->samples.empty();
  const bool use_sma = cfg.get_bool("train.use_sma") && use_sim;
  const bool use_jitter = cfg.get_bool("train.use_jitter");
  const std::int64_t iterations = cfg.get_int("train.iterations");
  const double lr0 = cfg.get_double("train.lr");
  const double momentum = cfg.get_double("train.momentum");

  if (real_data.samples.empty()) throw std::runtime_error("train: real dataset is empty");

  TrainResult result{
      DetectorModel(model_cfg, key_fold(seed, 0x696E6974ull)),
      MemoryBank(partition, model_cfg.d_feat, cfg.get_double("bank.momentum"), Domain::kReal,
                 key_fold(seed, 1)),
      MemoryBank(partition, model_cfg.d_feat, cfg.get_double("bank.momentum"), Domain::kSim,
                 key_fold(seed, 2)),
      WarmupState{},
      {},
      0};

  std::int64_t warmup_cfg = cfg.get_int("bank.warmup_iterations");
  result.warmup.threshold =
      warmup_cfg > 0 ? warmup_cfg
                     : static_cast<std::int64_t>(real_data.samples.size()) * (use_sim ? 2 : 1);

  detail::SampleCursor real_cursor(real_data.samples.size(), seed, 0x7265616Cull);
  detail::SampleCursor sim_cursor(use_sim ? sim_data->samples.size() : 0, seed, 0x73696Dull);
  const std::uint64_t jitter_base = key_fold(seed, 0x6A6974ull);

  result.metrics.reserve(static_cast<std::size_t>(iterations));
  for (std::int64_t it = 0; it < iterations; ++it) {
    const bool sim_turn = use_sim && (it % 2 == 1);
    const Domain domain = sim_turn ? Domain::kSim : Domain::kReal;
    const Dataset& data = sim_turn ? *sim_data : real_data;
    detail::SampleCursor& cursor = sim_turn ? sim_cursor : real_cursor;
    const TrainSample& sample = data.samples[cursor.next()];

    ForwardResult fwd;
    if (sim_turn && use_jitter && jitter_cfg.active()) {
      RngStream stream = epoch_reseed(jitter_base, static_cast<std::uint64_t>(cursor.epoch()),
                                      static_cast<std::uint64_t>(sample.scene_id));
      PointCloud jittered = jitter(sample.cloud, jitter_cfg, stream);
      fwd = result.model.forward(featurize(jittered, model_cfg.grid), domain);
    } else {
      fwd = result.model.forward(featurize(sample.cloud, model_cfg.grid), domain);
    }

    DetectionLossResult det = detection_loss(fwd.logits, sample.boxes, domain, weights,
                                             model_cfg.grid, model_cfg.num_classes, det_cfg);
    result.total_ignored_boxes += det.ignored_boxes;

    double sma_value = 0.0;
    Grid dbev(fwd.bev.h, fwd.bev.w, fwd.bev.c);
    bool have_dbev = false;
    if (use_sma) {
      std::vector<Box3D> pooled_boxes;
      for (const auto& b : sample.boxes)
        if (model_cfg.grid.contains(b.center.x, b.center.y)) pooled_boxes.push_back(b);
      auto feats = roi_grid_pool(fwd.bev, model_cfg.grid, pooled_boxes, model_cfg.roi_grid);
      std::vector<ObjectFeature> obj_feats(feats.size());
      for (std::size_t i = 0; i < feats.size(); ++i) {
        obj_feats[i].values = std::move(feats[i]);
        obj_feats[i].index = sector_index(pooled_boxes[i], partition);
        obj_feats[i].domain = domain;
      }
      static const std::vector<ObjectFeature> kNoFeatures;
      BidirectionalResult bi =
          sim_turn ? bidirectional_step(result.real_bank, result.sim_bank, kNoFeatures,
                                        obj_feats, result.warmup)
                   : bidirectional_step(result.real_bank, result.sim_bank, obj_feats,
                                        kNoFeatures, result.warmup);
      sma_value = bi.loss;
      const auto& grads = sim_turn ? bi.sim_feature_grads : bi.real_feature_grads;
      bool any = false;
      for (auto& g : grads)
        if (!g.empty()) any = true;
      if (any) {
        std::vector<std::vector<double>> scaled = grads;
        for (auto& g : scaled)
          for (auto& v : g) v *= weights.lambda;
        roi_grid_pool_backward(dbev, model_cfg.grid, pooled_boxes, model_cfg.roi_grid, scaled);
        have_dbev = true;
      }
    }

    MetricsRow row;
    row.iteration = it;
    if (sim_turn)
      row.l_det_sim = det.unweighted;
    else
      row.l_det_real = det.unweighted;
    row.l_sma = sma_value;
    row.total = weights.omega_real * row.l_det_real + weights.omega_sim * row.l_det_sim +
                weights.lambda * row.l_sma;
    if (!std::isfinite(row.total))
      throw std::runtime_error("training diverged at iteration " + std::to_string(it) +
                               " (non-finite loss)");
    result.metrics.push_back(row);

    result.model.backward(fwd, &det.dlogits, have_dbev ? &dbev : nullptr);
    double lr = lr0 * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(it) /
                                            static_cast<double>(iterations)));
    result.model.sgd_step(lr, momentum, trainable);
    result.model.zero_grad();
  }
  return result;
}

// ---------------------------------------------------------------------------

inline EvalReport evaluate_model(const DetectorModel& model, const Dataset& data,
                                 const MatchConfig& match_cfg, double score_threshold,
                                 double nms_radius) {
  std::vector<ScenePrediction> preds;
  for (const auto& sample : data.samples) {
    auto scene_preds = predict(model, sample.cloud, score_threshold, nms_radius);
    for (const auto& p : scene_preds) preds.push_back({sample.scene_id, p.box, p.score});
  }
  return evaluate_detections(preds, data.all_labels(), match_cfg,
                             model.config().num_classes);
}

}  // namespace s2r
