// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry points tying the library into reproducible runs. Every
// subcommand resolves its configuration, executes, and writes a manifest with
// the resolved config, seed and digests of all produced artifacts.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s2r/checkpoint.hpp"
#include "s2r/config.hpp"
#include "s2r/harness.hpp"
#include "s2r/simulator.hpp"
#include "s2r/trainer.hpp"

namespace fs = std::filesystem;
using namespace s2r;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
};

RunConfig resolve_config(const CommonArgs& args) {
  if (args.config_path.empty()) return RunConfig();
  return RunConfig::from_file(args.config_path);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
  cmd->add_option("--config", args.config_path, "flat JSON config file");
  cmd->add_option("--seed", args.seed, "base seed for all randomness");
  if (with_out) cmd->add_option("--out", args.out, "output directory")->required();
}

void write_manifest_for_dir(const std::string& command, const RunConfig& cfg,
                            std::uint64_t seed, const std::string& dir,
                            const std::vector<std::string>& rel_paths) {
  std::vector<ManifestEntry> entries;
  for (const auto& rel : rel_paths)
    entries.push_back({rel, file_digest((fs::path(dir) / rel).string())});
  write_file_bytes((fs::path(dir) / "manifest.json").string(),
                   manifest_json(command, cfg, seed, entries));
}

std::vector<std::string> dataset_artifacts(const std::string& dir) {
  DatasetIndex idx = read_index((fs::path(dir) / "index.json").string());
  std::vector<std::string> rel = idx.files;
  rel.push_back(idx.label_file);
  rel.push_back("index.json");
  return rel;
}

int cmd_generate(const CommonArgs& args, Domain domain, int scenes, int workers) {
  RunConfig cfg = resolve_config(args);
  generate_dataset(args.out, scenes, args.seed, cfg.generator(domain), workers);
  write_manifest_for_dir(domain == Domain::kSim ? "gen-sim" : "gen-real", cfg, args.seed,
                         args.out, dataset_artifacts(args.out));
  std::cout << "generated " << scenes << " " << domain_name(domain) << " scenes in "
            << args.out << "\n";
  return 0;
}

int cmd_augment(const CommonArgs& args, const std::string& input, const std::string& output,
                std::uint64_t epoch, std::uint64_t sample_id) {
  RunConfig cfg = resolve_config(args);
  PointCloud cloud = read_jpcd(input);
  JitterConfig jcfg = cfg.jitter_config();
  jcfg.sim_only = false;  // offline inspection jitters whatever it is given
  RngStream stream = epoch_reseed(args.seed, epoch, sample_id);
  write_jpcd(output, jitter(cloud, jcfg, stream));

  std::vector<ManifestEntry> entries = {
      {fs::path(output).filename().string(), file_digest(output)}};
  write_file_bytes(output + ".manifest.json",
                   manifest_json("augment", cfg, args.seed, entries));
  std::cout << "augmented " << cloud.size() << " points -> " << output << "\n";
  return 0;
}

void save_training_outputs(const RunConfig& cfg, const TrainResult& tr,
                           const std::string& out_dir, std::uint64_t seed,
                           const std::string& command) {
  fs::create_directories(out_dir);
  Checkpoint ck;
  checkpoint_add_model(ck, tr.model);
  checkpoint_add_bank(ck, tr.real_bank, "memory.real");
  checkpoint_add_bank(ck, tr.sim_bank, "memory.sim");
  save_checkpoint(ck, (fs::path(out_dir) / "checkpoint.bin").string(),
                  (fs::path(out_dir) / "checkpoint.json").string());
  write_file_bytes((fs::path(out_dir) / "metrics.csv").string(), metrics_csv(tr.metrics));
  write_manifest_for_dir(command, cfg, seed, out_dir,
                         {"checkpoint.bin", "checkpoint.json", "metrics.csv"});
}

int cmd_train(const CommonArgs& args, const std::string& real_dir,
              const std::string& sim_dir) {
  RunConfig cfg = resolve_config(args);
  Dataset real_data = load_dataset(real_dir);
  Dataset sim_data;
  const Dataset* sim_ptr = nullptr;
  if (!sim_dir.empty()) {
    sim_data = load_dataset(sim_dir);
    double fraction = cfg.get_double("train.sim_fraction");
    if (fraction < 1.0)
      sim_data = dataset_head(sim_data, static_cast<std::size_t>(
                                            fraction * static_cast<double>(
                                                           sim_data.samples.size())));
    sim_ptr = &sim_data;
  }
  TrainResult tr = train(cfg, real_data, sim_ptr, args.seed);
  save_training_outputs(cfg, tr, args.out, args.seed, "train");
  std::cout << "trained " << cfg.get_int("train.iterations") << " iterations; checkpoint in "
            << args.out << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_dir,
             const std::string& data_dir, const std::string& out_file) {
  RunConfig cfg = resolve_config(args);
  Checkpoint ck = load_checkpoint((fs::path(checkpoint_dir) / "checkpoint.bin").string(),
                                  (fs::path(checkpoint_dir) / "checkpoint.json").string());
  DetectorModel model(model_config_from_checkpoint(ck));
  restore_model(model, ck);
  Dataset data = load_dataset(data_dir);
  MatchConfig match = cfg.match_config();
  EvalReport report = evaluate_model(model, data, match,
                                     cfg.get_double("eval.score_threshold"),
                                     cfg.get_double("eval.nms_radius"));
  write_file_bytes(out_file, eval_report_json(report, match));
  std::vector<ManifestEntry> entries = {
      {fs::path(out_file).filename().string(), file_digest(out_file)}};
  write_file_bytes(out_file + ".manifest.json",
                   manifest_json("eval", cfg, args.seed, entries));
  std::cout << "mAP " << (report.map ? format_double(report.map_points()) : "null") << " ("
            << report.n_predictions << " predictions, " << report.n_labels << " labels)\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& data_root, int workers) {
  RunConfig cfg = resolve_config(args);
  BenchmarkPaths paths{data_root.empty() ? (fs::path(args.out) / "data").string() : data_root};
  if (!fs::exists(fs::path(paths.sim_dir()) / "index.json")) {
    std::cout << "generating benchmark datasets under " << paths.root << "\n";
    prepare_benchmark(cfg, args.seed, paths, workers);
  }
  Dataset real_full = load_dataset(paths.real_dir());
  Dataset sim_full = load_dataset(paths.sim_dir());
  Dataset val = load_dataset(paths.val_dir());

  AblationOutcome outcome = run_ablation(cfg, args.seed, real_full, sim_full, val);

  fs::create_directories(args.out);
  write_file_bytes((fs::path(args.out) / "ablation.csv").string(), ablation_csv(outcome));
  write_file_bytes((fs::path(args.out) / "ablation.txt").string(), ablation_table(outcome));
  MatchConfig match = cfg.match_config();
  std::vector<std::string> artifacts = {"ablation.csv", "ablation.txt"};
  for (const auto& row : outcome.rows) {
    std::string rel = "report_" + row.spec.name + ".json";
    write_file_bytes((fs::path(args.out) / rel).string(),
                     eval_report_json(row.report, match));
    artifacts.push_back(rel);
  }
  write_manifest_for_dir("ablate", cfg, args.seed, args.out, artifacts);
  std::cout << ablation_table(outcome);
  std::string why;
  if (ablation_ordering_ok(outcome, cfg, &why))
    std::cout << "ordering: ok\n";
  else
    std::cout << "ordering: VIOLATED: " << why << "\n";
  return 0;
}

int cmd_corner_case(const CommonArgs& args, int class_id, const std::string& data_root,
                    int workers) {
  RunConfig cfg = resolve_config(args);
  if (class_id < 0) class_id = static_cast<int>(cfg.get_int("corner.class_id"));
  BenchmarkPaths paths{data_root.empty() ? (fs::path(args.out) / "data").string() : data_root};
  if (!fs::exists(fs::path(paths.sim_dir()) / "index.json")) {
    std::cout << "generating benchmark datasets under " << paths.root << "\n";
    prepare_benchmark(cfg, args.seed, paths, workers);
  }
  Dataset real_full = load_dataset(paths.real_dir());
  Dataset sim_full = load_dataset(paths.sim_dir());
  Dataset val = load_dataset(paths.val_dir());

  CornerCaseOutcome outcome = run_corner_case(cfg, args.seed, class_id, real_full, sim_full, val);

  fs::create_directories(args.out);
  write_file_bytes((fs::path(args.out) / "corner_case.json").string(),
                   corner_case_json(outcome, cfg.match_config()));
  write_manifest_for_dir("corner-case", cfg, args.seed, args.out, {"corner_case.json"});
  std::printf("class %d: baseline AP %.2f, full AP %.2f\n", class_id,
              outcome.class_ap_points(outcome.baseline), outcome.class_ap_points(outcome.full));
  return 0;
}

int cmd_inspect_memory(const std::string& checkpoint_dir, const std::string& domain,
                       const std::string& out_file) {
  Checkpoint ck = load_checkpoint((fs::path(checkpoint_dir) / "checkpoint.bin").string(),
                                  (fs::path(checkpoint_dir) / "checkpoint.json").string());
  MemoryBank bank = restore_bank(ck, "memory." + domain);
  std::string dump = memory_coverage_json(bank);
  if (out_file.empty())
    std::cout << dump;
  else
    write_file_bytes(out_file, dump);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-domain LiDAR benchmark: generation, augmentation, training, evaluation"};
  app.require_subcommand(1);

  CommonArgs gen_sim_args, gen_real_args, augment_args, train_args, eval_args, ablate_args,
      corner_args;

  int gen_sim_scenes = 0, gen_real_scenes = 0;
  int gen_sim_workers = 1, gen_real_workers = 1, ablate_workers = 1, corner_workers = 1;

  auto* gen_sim = app.add_subcommand("gen-sim", "generate a noiseless simulation dataset");
  add_common(gen_sim, gen_sim_args);
  gen_sim->add_option("--scenes", gen_sim_scenes, "number of scenes")->required();
  gen_sim->add_option("--workers", gen_sim_workers, "parallel workers");

  auto* gen_real = app.add_subcommand("gen-real", "generate a pseudo-real dataset");
  add_common(gen_real, gen_real_args);
  gen_real->add_option("--scenes", gen_real_scenes, "number of scenes")->required();
  gen_real->add_option("--workers", gen_real_workers, "parallel workers");

  std::string augment_in, augment_out;
  std::uint64_t augment_epoch = 0, augment_sample = 0;
  auto* augment_cmd = app.add_subcommand("augment", "jitter a JPCD file offline");
  add_common(augment_cmd, augment_args, /*with_out=*/false);
  augment_cmd->add_option("--input", augment_in, "input JPCD file")->required();
  augment_cmd->add_option("--output", augment_out, "output JPCD file")->required();
  augment_cmd->add_option("--epoch", augment_epoch, "epoch index for the noise stream");
  augment_cmd->add_option("--sample-id", augment_sample, "sample id for the noise stream");

  std::string train_real, train_sim;
  auto* train_cmd = app.add_subcommand("train", "train the detector");
  add_common(train_cmd, train_args);
  train_cmd->add_option("--real", train_real, "real-domain dataset directory")->required();
  train_cmd->add_option("--sim", train_sim, "sim-domain dataset directory");

  std::string eval_checkpoint, eval_data, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval_cmd, eval_args, /*with_out=*/false);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "training output directory")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--report", eval_out, "output report path")->required();

  std::string ablate_data;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the six-row ablation suite");
  add_common(ablate_cmd, ablate_args);
  ablate_cmd->add_option("--data", ablate_data, "existing benchmark data root to reuse");
  ablate_cmd->add_option("--workers", ablate_workers, "generation workers");

  int corner_class = -1;
  std::string corner_data;
  auto* corner_cmd = app.add_subcommand("corner-case", "held-out class study");
  add_common(corner_cmd, corner_args);
  corner_cmd->add_option("--class-id", corner_class, "class to strip from real labels");
  corner_cmd->add_option("--data", corner_data, "existing benchmark data root to reuse");
  corner_cmd->add_option("--workers", corner_workers, "generation workers");

  std::string inspect_checkpoint, inspect_domain = "real", inspect_out;
  auto* inspect_cmd = app.add_subcommand("inspect-memory", "dump memory-bank grid coverage");
  inspect_cmd->add_option("--checkpoint", inspect_checkpoint, "training output directory")
      ->required();
  inspect_cmd->add_option("--domain", inspect_domain, "real or sim")
      ->check(CLI::IsMember({"real", "sim"}));
  inspect_cmd->add_option("--report", inspect_out, "output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << app.help() << std::flush;
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_sim->parsed()) return cmd_generate(gen_sim_args, Domain::kSim, gen_sim_scenes,
                                               gen_sim_workers);
    if (gen_real->parsed()) return cmd_generate(gen_real_args, Domain::kReal, gen_real_scenes,
                                                gen_real_workers);
    if (augment_cmd->parsed())
      return cmd_augment(augment_args, augment_in, augment_out, augment_epoch, augment_sample);
    if (train_cmd->parsed()) return cmd_train(train_args, train_real, train_sim);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_checkpoint, eval_data, eval_out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, ablate_data, ablate_workers);
    if (corner_cmd->parsed())
      return cmd_corner_case(corner_args, corner_class, corner_data, corner_workers);
    if (inspect_cmd->parsed())
      return cmd_inspect_memory(inspect_checkpoint, inspect_domain, inspect_out);
  } catch (const ConfigError& e) {
    std::cerr << app.help() << std::flush;
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
