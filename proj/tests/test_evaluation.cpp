// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "s2r/evaluation.hpp"
#include "s2r/rng.hpp"

using namespace s2r;

namespace {

// Exhaustive reference matcher and integrator sharing only the spec'd
// conventions (score-descending greedy nearest matching, envelope
// interpolation at every recall level). Matching scans all labels per
// prediction; the area comes from a per-recall-level scan instead of the
// right-to-left envelope.
double oracle_ap(std::vector<ScenePrediction> preds, std::vector<LabeledBox> labels,
                 double threshold) {
  std::sort(preds.begin(), preds.end(), [](const ScenePrediction& a, const ScenePrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
    if (a.box.center.x != b.box.center.x) return a.box.center.x < b.box.center.x;
    if (a.box.center.y != b.box.center.y) return a.box.center.y < b.box.center.y;
    return a.box.center.z < b.box.center.z;
  });
  std::sort(labels.begin(), labels.end(), [](const LabeledBox& a, const LabeledBox& b) {
    if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
    if (a.box.center.x != b.box.center.x) return a.box.center.x < b.box.center.x;
    if (a.box.center.y != b.box.center.y) return a.box.center.y < b.box.center.y;
    return a.box.center.z < b.box.center.z;
  });

  std::vector<bool> taken(labels.size(), false);
  std::vector<int> tp_prefix(preds.size(), 0);
  int tp_total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int best = -1;
    double best_d = 1e300;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (taken[j] || labels[j].scene_id != preds[i].scene_id) continue;
      double d = std::hypot(preds[i].box.center.x - labels[j].box.center.x,
                            preds[i].box.center.y - labels[j].box.center.y);
      if (d <= threshold && d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      ++tp_total;
    }
    tp_prefix[i] = tp_total;
  }

  const int n_labels = static_cast<int>(labels.size());
  double total = 0.0;
  for (int k = 1; k <= n_labels; ++k) {
    double best_precision = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (tp_prefix[i] >= k)
        best_precision = std::max(
            best_precision, static_cast<double>(tp_prefix[i]) / static_cast<double>(i + 1));
    total += best_precision;
  }
  return total / static_cast<double>(n_labels);
}

Box3D box_at(double x, double y, int cls = 0) {
  Box3D b;
  b.center = {x, y, 0};
  b.length = 4;
  b.width = 2;
  b.height = 1.5;
  b.category_id = cls;
  return b;
}

int count_matched(const std::vector<ScenePrediction>& preds,
                  const std::vector<LabeledBox>& labels, double thr) {
  // Re-run the oracle matching to count pairs.
  auto p = preds;
  auto l = labels;
  std::sort(p.begin(), p.end(),
            [](const ScenePrediction& a, const ScenePrediction& b) { return a.score > b.score; });
  std::vector<bool> taken(l.size(), false);
  int matched = 0;
  for (const auto& pred : p) {
    int best = -1;
    double best_d = 1e300;
    for (std::size_t j = 0; j < l.size(); ++j) {
      if (taken[j] || l[j].scene_id != pred.scene_id) continue;
      double d = std::hypot(pred.box.center.x - l[j].box.center.x,
                            pred.box.center.y - l[j].box.center.y);
      if (d <= thr && d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      ++matched;
    }
  }
  return matched;
}

}  // namespace

TEST_CASE("perfect predictions score AP 1", "[evaluation]") {
  std::vector<LabeledBox> labels = {{0, box_at(5, 5)}, {0, box_at(-3, 2)}, {1, box_at(8, 0)}};
  std::vector<ScenePrediction> preds;
  for (const auto& l : labels) preds.push_back({l.scene_id, l.box, 1.0});
  auto ap = average_precision(preds, labels, 0.5);
  REQUIRE(ap);
  REQUIRE(*ap == 1.0);
}

TEST_CASE("no predictions score AP 0; no labels yield null", "[evaluation]") {
  std::vector<LabeledBox> labels = {{0, box_at(5, 5)}};
  auto ap = average_precision({}, labels, 1.0);
  REQUIRE(ap);
  REQUIRE(*ap == 0.0);
  REQUIRE_FALSE(average_precision({{0, box_at(5, 5), 0.9}}, {}, 1.0).has_value());
}

TEST_CASE("production AP equals the exhaustive oracle", "[evaluation]") {
  RngStream rng = make_stream(777, 0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LabeledBox> labels;
    std::vector<ScenePrediction> preds;
    int n_labels = 3 + static_cast<int>(rng.uniform_index(6));
    int n_scenes = 1 + static_cast<int>(rng.uniform_index(3));
    for (int i = 0; i < n_labels; ++i)
      labels.push_back({static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_scenes))),
                        box_at(rng.uniform(-20, 20), rng.uniform(-20, 20))});
    int n_preds = static_cast<int>(rng.uniform_index(20));
    for (int i = 0; i < n_preds; ++i) {
      ScenePrediction p;
      p.scene_id = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_scenes)));
      if (rng.uniform() < 0.6 && !labels.empty()) {
        const auto& l = labels[rng.uniform_index(labels.size())];
        p.scene_id = l.scene_id;
        p.box = box_at(l.box.center.x + rng.uniform(-3, 3), l.box.center.y + rng.uniform(-3, 3));
      } else {
        p.box = box_at(rng.uniform(-20, 20), rng.uniform(-20, 20));
      }
      p.score = rng.uniform();
      preds.push_back(p);
    }
    for (double thr : {0.5, 1.0, 2.0, 4.0}) {
      auto got = average_precision(preds, labels, thr);
      REQUIRE(got);
      REQUIRE(std::abs(*got - oracle_ap(preds, labels, thr)) < 1e-9);
    }
  }
}

TEST_CASE("matching is one-to-one", "[evaluation]") {
  RngStream rng = make_stream(31338, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledBox> labels;
    std::vector<ScenePrediction> preds;
    int nl = 1 + static_cast<int>(rng.uniform_index(6));
    int np = 1 + static_cast<int>(rng.uniform_index(10));
    for (int i = 0; i < nl; ++i)
      labels.push_back({0, box_at(rng.uniform(-5, 5), rng.uniform(-5, 5))});
    for (int i = 0; i < np; ++i)
      preds.push_back({0, box_at(rng.uniform(-5, 5), rng.uniform(-5, 5)), rng.uniform()});
    int matched = count_matched(preds, labels, 4.0);
    REQUIRE(matched <= std::min(nl, np));
  }
}

TEST_CASE("evaluation is independent of input ordering", "[evaluation]") {
  RngStream rng = make_stream(55, 0);
  std::vector<LabeledBox> labels;
  std::vector<ScenePrediction> preds;
  for (int i = 0; i < 12; ++i)
    labels.push_back({i % 3, box_at(rng.uniform(-15, 15), rng.uniform(-15, 15))});
  for (int i = 0; i < 25; ++i)
    preds.push_back({i % 3, box_at(rng.uniform(-15, 15), rng.uniform(-15, 15)), rng.uniform()});

  auto base = average_precision(preds, labels, 2.0);
  std::vector<ScenePrediction> shuffled_p(preds.rbegin(), preds.rend());
  std::vector<LabeledBox> shuffled_l(labels.rbegin(), labels.rend());
  RngStream shuffle_rng = make_stream(1, 1);
  deterministic_shuffle(shuffled_p, shuffle_rng);
  deterministic_shuffle(shuffled_l, shuffle_rng);
  auto shuffled = average_precision(shuffled_p, shuffled_l, 2.0);
  REQUIRE(base);
  REQUIRE(shuffled);
  REQUIRE(*base == *shuffled);
}

TEST_CASE("AP monotonicity under added predictions", "[evaluation]") {
  RngStream rng = make_stream(220, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledBox> labels;
    std::vector<ScenePrediction> preds;
    for (int i = 0; i < 5; ++i)
      labels.push_back({0, box_at(rng.uniform(-20, 20), rng.uniform(-20, 20))});
    for (int i = 0; i < 8; ++i)
      preds.push_back(
          {0, box_at(rng.uniform(-20, 20), rng.uniform(-20, 20)), rng.uniform(0.1, 0.9)});
    double before = *average_precision(preds, labels, 2.0);

    // A correct top-score hit never lowers AP.
    auto with_hit = preds;
    with_hit.push_back({0, labels[0].box, 1.0});
    REQUIRE(*average_precision(with_hit, labels, 2.0) >= before - 1e-12);

    // A far-away bottom-score false positive never raises it.
    auto with_fp = preds;
    with_fp.push_back({0, box_at(500, 500), 0.0});
    REQUIRE(*average_precision(with_fp, labels, 2.0) <= before + 1e-12);
  }
}

TEST_CASE("report aggregates per class and skips label-free classes", "[evaluation]") {
  MatchConfig cfg;
  std::vector<LabeledBox> labels = {{0, box_at(5, 5, 0)}, {0, box_at(-5, 5, 1)}};
  std::vector<ScenePrediction> preds = {{0, box_at(5, 5, 0), 0.9},
                                        {0, box_at(400, 0, 2), 0.8}};
  EvalReport report = evaluate_detections(preds, labels, cfg, 4);
  REQUIRE(report.classes.size() == 4);
  REQUIRE(report.classes[0].mean_ap);
  REQUIRE(*report.classes[0].mean_ap == 1.0);
  REQUIRE(report.classes[1].mean_ap);
  REQUIRE(*report.classes[1].mean_ap == 0.0);
  REQUIRE_FALSE(report.classes[2].mean_ap);  // predictions but no labels: null
  REQUIRE_FALSE(report.classes[3].mean_ap);
  REQUIRE(report.map);
  REQUIRE(*report.map == Catch::Approx(0.5));  // mean over classes 0 and 1 only

  std::string json = eval_report_json(report, cfg);
  REQUIRE(json.find("\"mean_ap\":null") != std::string::npos);
  REQUIRE(json.find("\"map\":0.5") != std::string::npos);
}

TEST_CASE("threshold validation", "[evaluation]") {
  MatchConfig cfg;
  cfg.thresholds = {1.0, 0.5};
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.thresholds = {};
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("score quantization coarsens the sweep deterministically", "[evaluation]") {
  std::vector<LabeledBox> labels = {{0, box_at(0, 0)}, {0, box_at(10, 0)}};
  std::vector<ScenePrediction> preds = {{0, box_at(0.1, 0), 0.501},
                                        {0, box_at(10.1, 0), 0.499}};
  auto exact = average_precision(preds, labels, 1.0, 0.0);
  auto coarse = average_precision(preds, labels, 1.0, 0.5);
  REQUIRE(exact);
  REQUIRE(coarse);
  REQUIRE(*exact == 1.0);
  REQUIRE(*coarse == 1.0);  // both hits survive quantization; ranking ties break on coords
}
