// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "s2r/detector.hpp"
#include "s2r/io.hpp"

namespace s2r {

struct MatchConfig {
  std::vector<double> thresholds = {0.5, 1.0, 2.0, 4.0};  // meters, ascending
  double score_resolution = 0.0;  // > 0 quantizes scores before ranking

  void validate() const {
    if (thresholds.empty()) throw std::invalid_argument("no match thresholds");
    double prev = 0.0;
    for (double t : thresholds) {
      if (t <= prev) throw std::invalid_argument("thresholds must be positive ascending");
      prev = t;
    }
  }
};

struct ScenePrediction {
  int scene_id = 0;
  Box3D box;
  double score = 0.0;
};

namespace detail {

inline double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
}

// Canonical orderings make evaluation independent of input order; ties in
// score or distance break on coordinates.
inline bool pred_before(const ScenePrediction& a, const ScenePrediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
  if (a.box.center.x != b.box.center.x) return a.box.center.x < b.box.center.x;
  if (a.box.center.y != b.box.center.y) return a.box.center.y < b.box.center.y;
  return a.box.center.z < b.box.center.z;
}

inline bool label_before(const LabeledBox& a, const LabeledBox& b) {
  if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
  if (a.box.center.x != b.box.center.x) return a.box.center.x < b.box.center.x;
  if (a.box.center.y != b.box.center.y) return a.box.center.y < b.box.center.y;
  return a.box.center.z < b.box.center.z;
}

}  // namespace detail

// Greedy score-descending one-to-one matching by BEV center distance, then
// area under the precision-recall curve with the precision envelope
// interpolated at every recall step. Inputs must already be filtered to one
// class. Returns nullopt when the class has no labels.
inline std::optional<double> average_precision(std::vector<ScenePrediction> preds,
                                               std::vector<LabeledBox> labels,
                                               double threshold,
                                               double score_resolution = 0.0) {
  if (labels.empty()) return std::nullopt;
  if (score_resolution > 0.0)
    for (auto& p : preds)
      p.score = std::round(p.score / score_resolution) * score_resolution;
  std::sort(preds.begin(), preds.end(), detail::pred_before);
  std::sort(labels.begin(), labels.end(), detail::label_before);

  std::vector<bool> taken(labels.size(), false);
  std::vector<bool> is_tp(preds.size(), false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int best = -1;
    double best_dist = threshold;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (taken[j] || labels[j].scene_id != preds[i].scene_id) continue;
      double d = detail::bev_distance(preds[i].box, labels[j].box);
      if (d <= best_dist && (best < 0 || d < best_dist)) {
        best = static_cast<int>(j);
        best_dist = d;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      is_tp[i] = true;
    }
  }

  const double n_labels = static_cast<double>(labels.size());
  std::vector<double> precision(preds.size()), recall(preds.size());
  double tp = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (is_tp[i]) tp += 1.0;
    precision[i] = tp / static_cast<double>(i + 1);
    recall[i] = tp / n_labels;
  }
  // Envelope from the right, integrate at each recall increase.
  double ap = 0.0, env = 0.0;
  for (std::size_t k = preds.size(); k-- > 0;) {
    env = std::max(env, precision[k]);
    double prev_recall = k == 0 ? 0.0 : recall[k - 1];
    if (recall[k] > prev_recall) ap += (recall[k] - prev_recall) * env;
  }
  return ap;
}

struct ClassEval {
  int class_id = 0;
  std::vector<std::optional<double>> ap_per_threshold;
  std::optional<double> mean_ap;
  std::size_t n_predictions = 0;
  std::size_t n_labels = 0;
};

struct EvalReport {
  std::vector<ClassEval> classes;
  std::optional<double> map;
  std::size_t n_predictions = 0;
  std::size_t n_labels = 0;

  // 100-scaled mAP for human-readable tables.
  double map_points() const { return map ? *map * 100.0 : 0.0; }
};

inline EvalReport evaluate_detections(const std::vector<ScenePrediction>& preds,
                                      const std::vector<LabeledBox>& labels,
                                      const MatchConfig& cfg, int num_classes) {
  cfg.validate();
  EvalReport report;
  report.n_predictions = preds.size();
  report.n_labels = labels.size();

  double class_sum = 0.0;
  int class_count = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    ClassEval ce;
    ce.class_id = cls;
    std::vector<ScenePrediction> cp;
    std::vector<LabeledBox> cl;
    for (const auto& p : preds)
      if (p.box.category_id == cls) cp.push_back(p);
    for (const auto& l : labels)
      if (l.box.category_id == cls) cl.push_back(l);
    ce.n_predictions = cp.size();
    ce.n_labels = cl.size();

    double sum = 0.0;
    int cnt = 0;
    for (double thr : cfg.thresholds) {
      auto ap = average_precision(cp, cl, thr, cfg.score_resolution);
      ce.ap_per_threshold.push_back(ap);
      if (ap) {
        sum += *ap;
        ++cnt;
      }
    }
    if (cnt > 0) {
      ce.mean_ap = sum / cnt;
      class_sum += *ce.mean_ap;
      ++class_count;
    }
    report.classes.push_back(std::move(ce));
  }
  if (class_count > 0) report.map = class_sum / class_count;
  return report;
}

inline std::string eval_report_json(const EvalReport& report, const MatchConfig& cfg) {
  std::string out = "{\"classes\":[";
  for (std::size_t i = 0; i < report.classes.size(); ++i) {
    const auto& ce = report.classes[i];
    if (i) out += ",";
    out += "{\"ap_per_threshold\":[";
    for (std::size_t k = 0; k < ce.ap_per_threshold.size(); ++k) {
      if (k) out += ",";
      out += ce.ap_per_threshold[k] ? format_double(*ce.ap_per_threshold[k]) : "null";
    }
    out += "],\"class_id\":" + std::to_string(ce.class_id);
    out += ",\"mean_ap\":";
    out += ce.mean_ap ? format_double(*ce.mean_ap) : "null";
    out += ",\"n_labels\":" + std::to_string(ce.n_labels);
    out += ",\"n_predictions\":" + std::to_string(ce.n_predictions) + "}";
  }
  out += "],\"map\":";
  out += report.map ? format_double(*report.map) : "null";
  out += ",\"n_labels\":" + std::to_string(report.n_labels);
  out += ",\"n_predictions\":" + std::to_string(report.n_predictions);
  out += ",\"thresholds\":[";
  for (std::size_t k = 0; k < cfg.thresholds.size(); ++k) {
    if (k) out += ",";
    out += format_double(cfg.thresholds[k]);
  }
  out += "]}\n";
  return out;
}

}  // namespace s2r
