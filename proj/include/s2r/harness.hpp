// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "s2r/config.hpp"
#include "s2r/io.hpp"
#include "s2r/simulator.hpp"
#include "s2r/trainer.hpp"

namespace s2r {

// ---------------------------------------------------------------------------
// Benchmark datasets: a sim-domain training set, a pseudo-real training set
// (only a 1/real_subset_div slice of it is treated as labeled), and a
// pseudo-real validation set.

struct BenchmarkPaths {
  std::string root;
  std::string sim_dir() const { return (std::filesystem::path(root) / "sim").string(); }
  std::string real_dir() const { return (std::filesystem::path(root) / "real").string(); }
  std::string val_dir() const { return (std::filesystem::path(root) / "val").string(); }
};

inline void prepare_benchmark(const RunConfig& cfg, std::uint64_t seed,
                              const BenchmarkPaths& paths, int workers = 1) {
  generate_dataset(paths.sim_dir(), static_cast<int>(cfg.get_int("ablate.sim_scenes")),
                   key_fold(seed, 0x67656E73696Dull), cfg.generator(Domain::kSim), workers);
  generate_dataset(paths.real_dir(), static_cast<int>(cfg.get_int("ablate.real_scenes")),
                   key_fold(seed, 0x67656E7265616Cull), cfg.generator(Domain::kReal), workers);
  generate_dataset(paths.val_dir(), static_cast<int>(cfg.get_int("ablate.val_scenes")),
                   key_fold(seed, 0x67656E76616Cull), cfg.generator(Domain::kReal), workers);
}

// ---------------------------------------------------------------------------
// Ablation suite. Rows differ only in the four declared toggles.

struct AblationRowSpec {
  std::string name;
  bool use_sim = false;
  bool domain_aware = false;
  bool use_sma = false;
  bool use_jitter = false;
  double sim_fraction = 1.0;
};

inline std::vector<AblationRowSpec> ablation_row_specs() {
  return {
      {"real_only", false, true, false, false, 1.0},
      {"naive_joint", true, false, false, false, 1.0},
      {"domain_aware", true, true, false, false, 1.0},
      {"sector_align", true, true, true, false, 1.0},
      {"full", true, true, true, true, 1.0},
      {"half_sim", true, true, true, true, 0.5},
  };
}

inline RunConfig row_config(const RunConfig& base, const AblationRowSpec& spec) {
  RunConfig cfg = base;
  cfg.set_bool("train.use_sim_data", spec.use_sim);
  cfg.set_bool("model.domain_aware", spec.domain_aware);
  cfg.set_bool("train.use_sma", spec.use_sma);
  cfg.set_bool("train.use_jitter", spec.use_jitter);
  cfg.set_double("train.sim_fraction", spec.sim_fraction);
  return cfg;
}

struct AblationRowResult {
  AblationRowSpec spec;
  EvalReport report;
  double map_points = 0.0;  // class-mean AP x 100
};

struct AblationOutcome {
  std::vector<AblationRowResult> rows;

  const AblationRowResult& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.spec.name == name) return r;
    throw std::out_of_range("no ablation row named " + name);
  }
};

inline AblationRowResult run_training_row(const RunConfig& base, const AblationRowSpec& spec,
                                          const Dataset& real_subset, const Dataset& sim_full,
                                          const Dataset& val, std::uint64_t seed) {
  RunConfig cfg = row_config(base, spec);
  Dataset sim_slice;
  const Dataset* sim_ptr = nullptr;
  if (spec.use_sim) {
    if (spec.sim_fraction < 1.0) {
      sim_slice = dataset_head(
          sim_full, static_cast<std::size_t>(spec.sim_fraction *
                                             static_cast<double>(sim_full.samples.size())));
      sim_ptr = &sim_slice;
    } else {
      sim_ptr = &sim_full;
    }
  }
  TrainResult tr = train(cfg, real_subset, sim_ptr, seed);
  AblationRowResult row;
  row.spec = spec;
  row.report = evaluate_model(tr.model, val, cfg.match_config(),
                              cfg.get_double("eval.score_threshold"),
                              cfg.get_double("eval.nms_radius"));
  row.map_points = row.report.map_points();
  return row;
}

inline AblationOutcome run_ablation(const RunConfig& cfg, std::uint64_t seed,
                                    const Dataset& real_full, const Dataset& sim_full,
                                    const Dataset& val) {
  Dataset real_subset =
      dataset_subset(real_full, static_cast<int>(cfg.get_int("ablate.real_subset_div")));
  AblationOutcome outcome;
  for (const auto& spec : ablation_row_specs())
    outcome.rows.push_back(run_training_row(cfg, spec, real_subset, sim_full, val, seed));
  return outcome;
}

// Directional expectations on the fixed-seed benchmark; returns false and
// fills `why` on the first violated ordering.
inline bool ablation_ordering_ok(const AblationOutcome& o, const RunConfig& cfg,
                                 std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  double full = o.row("full").map_points;
  double sa = o.row("sector_align").map_points;
  double naive = o.row("naive_joint").map_points;
  double real_only = o.row("real_only").map_points;
  double half = o.row("half_sim").map_points;
  char buf[160];
  if (!(full > sa)) {
    std::snprintf(buf, sizeof(buf), "full (%.2f) must beat sector_align (%.2f)", full, sa);
    return fail(buf);
  }
  if (!(sa > naive)) {
    std::snprintf(buf, sizeof(buf), "sector_align (%.2f) must beat naive_joint (%.2f)", sa,
                  naive);
    return fail(buf);
  }
  double margin = cfg.get_double("ablate.margin_over_real");
  if (!(full >= real_only + margin)) {
    std::snprintf(buf, sizeof(buf), "full (%.2f) must beat real_only (%.2f) by %.2f", full,
                  real_only, margin);
    return fail(buf);
  }
  double half_margin = cfg.get_double("ablate.margin_half_sim");
  if (!(half >= sa - half_margin)) {
    std::snprintf(buf, sizeof(buf), "half_sim (%.2f) must reach sector_align (%.2f) - %.2f",
                  half, sa, half_margin);
    return fail(buf);
  }
  return true;
}

inline std::string ablation_csv(const AblationOutcome& o) {
  std::string out = "row,synthetic,domain_aware,sector_align,jitter,sim_fraction,map\n";
  for (const auto& r : o.rows) {
    out += r.spec.name;
    out += r.spec.use_sim ? ",1" : ",0";
    out += r.spec.domain_aware ? ",1" : ",0";
    out += r.spec.use_sma ? ",1" : ",0";
    out += r.spec.use_jitter ? ",1" : ",0";
    out += "," + format_double(r.spec.sim_fraction);
    out += "," + format_double(r.map_points) + "\n";
  }
  return out;
}

inline std::string ablation_table(const AblationOutcome& o) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %-5s %-7s %-7s %-7s %-9s %8s\n", "row", "syn",
                "dsb", "align", "jitter", "sim-frac", "mAP");
  out += line;
  out += std::string(62, '-') + "\n";
  for (const auto& r : o.rows) {
    std::snprintf(line, sizeof(line), "%-14s %-5s %-7s %-7s %-7s %-9.2f %8.2f\n",
                  r.spec.name.c_str(), r.spec.use_sim ? "yes" : "no",
                  r.spec.domain_aware ? "yes" : "no", r.spec.use_sma ? "yes" : "no",
                  r.spec.use_jitter ? "yes" : "no", r.spec.sim_fraction, r.map_points);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corner-case protocol: one class is stripped from the pseudo-real training
// labels; the full pipeline must still detect it on the validation set via
// the simulation data, while a real-only baseline cannot.

struct CornerCaseOutcome {
  int class_id = 0;
  EvalReport baseline;  // real-subset-only, class stripped
  EvalReport full;      // joint training, class stripped from real labels

  double class_ap_points(const EvalReport& r) const {
    for (const auto& ce : r.classes)
      if (ce.class_id == class_id && ce.mean_ap) return *ce.mean_ap * 100.0;
    return 0.0;
  }
};

inline CornerCaseOutcome run_corner_case(const RunConfig& cfg, std::uint64_t seed,
                                         int class_id, const Dataset& real_full,
                                         const Dataset& sim_full, const Dataset& val) {
  bool in_sim = false;
  for (const auto& s : sim_full.samples) {
    for (const auto& b : s.boxes)
      if (b.category_id == class_id) {
        in_sim = true;
        break;
      }
    if (in_sim) break;
  }
  if (!in_sim)
    throw std::runtime_error("corner-case class " + std::to_string(class_id) +
                             " absent from the simulation data; alignment cannot help");

  Dataset real_subset =
      dataset_subset(real_full, static_cast<int>(cfg.get_int("ablate.real_subset_div")));
  Dataset stripped = strip_class_labels(real_subset, class_id);

  CornerCaseOutcome out;
  out.class_id = class_id;
  AblationRowSpec baseline_spec{"real_only", false, true, false, false, 1.0};
  AblationRowSpec full_spec{"full", true, true, true, true, 1.0};
  out.baseline = run_training_row(cfg, baseline_spec, stripped, sim_full, val, seed).report;
  out.full = run_training_row(cfg, full_spec, stripped, sim_full, val, seed).report;
  return out;
}

inline std::string corner_case_json(const CornerCaseOutcome& o, const MatchConfig& match) {
  std::string out = "{\"baseline\":" ;
  std::string b = eval_report_json(o.baseline, match);
  if (!b.empty() && b.back() == '\n') b.pop_back();
  std::string f = eval_report_json(o.full, match);
  if (!f.empty() && f.back() == '\n') f.pop_back();
  out += b;
  out += ",\"baseline_class_ap\":" + format_double(o.class_ap_points(o.baseline));
  out += ",\"class_id\":" + std::to_string(o.class_id);
  out += ",\"full\":" + f;
  out += ",\"full_class_ap\":" + format_double(o.class_ap_points(o.full));
  out += "}\n";
  return out;
}

}  // namespace s2r
