#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "hebbes/harness.hpp"

namespace fs = std::filesystem;
using namespace hebbes;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericalAbort = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string resume;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::optional<int> rho;
  std::optional<int> held_out;
  std::optional<std::string> baseline;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* c = cmd->add_option("--config", args.config_path, "experiment config file (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out-dir", args.out_dir, "output directory");
  cmd->add_option("--resume", args.resume, "checkpoint to resume/load");
  cmd->add_option("--workers", args.workers, "rollout worker threads (0 = hardware)");
  cmd->add_option("--seed", args.seed, "override the config base seed");
  cmd->add_option("--rho", args.rho, "override the sharing ratio");
  cmd->add_option("--held-out", args.held_out, "override the held-out variation id");
  cmd->add_option("--baseline", args.baseline, "override the baseline (hebbian|static|recurrent)");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_config_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.rho) cfg.rho = *args.rho;
  if (args.held_out) cfg.held_out_id = *args.held_out;
  if (args.baseline) cfg.baseline = baseline_from_string(*args.baseline);
  cfg.validate();
  return cfg;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void print_progress(const GenerationRecord& rec) {
  if (rec.generation % 10 != 0) return;
  std::cout << "gen " << rec.generation << "  fitness mean " << rec.fitness_mean
            << "  max " << rec.fitness_max << "  lr " << rec.lr << "\n";
}

int cmd_train(const CommonArgs& args) {
  ExperimentConfig cfg = resolve_config(args);
  int workers = resolve_workers(args.workers);
  TrainResult result = train(cfg, args.out_dir, workers, args.resume, print_progress);
  std::cout << "trained to generation " << result.generation << ", checkpoint: "
            << result.checkpoint_path.string() << "\n";
  if (result.status == TrainStatus::NumericalAbort) {
    std::cerr << "numerical abort: parameters left the finite range; "
              << "diagnostic checkpoint written\n";
    return kExitNumericalAbort;
  }
  return kExitOk;
}

int cmd_evaluate(const CommonArgs& args) {
  ExperimentConfig cfg = resolve_config(args);
  if (args.resume.empty()) {
    throw ConfigError("evaluate needs --resume <checkpoint>");
  }
  EsState state = load_checkpoint(args.resume, cfg.es, config_hash(cfg));
  int workers = resolve_workers(args.workers);
  std::vector<EvalCell> cells = evaluate(cfg, state, workers);
  write_evaluation(cfg, cells, args.out_dir);
  std::string label = cfg.baseline == BaselineKind::Hebbian
                          ? to_string(cfg.model) + " (rho=" + std::to_string(cfg.rho) + ")"
                          : to_string(cfg.baseline);
  std::cout << render_eval_table(label, cells);
  std::cout << "written: " << (fs::path(args.out_dir) / "eval.json").string() << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, std::vector<int> rho_list) {
  ExperimentConfig cfg = resolve_config(args);
  if (rho_list.empty()) {
    int n = cfg.genotype_rows();
    rho_list = {1, 16, 32, 64, 128, 256, n};
    std::erase_if(rho_list, [n](int r) { return r > n; });
    std::sort(rho_list.begin(), rho_list.end());
    rho_list.erase(std::unique(rho_list.begin(), rho_list.end()), rho_list.end());
  }
  int workers = resolve_workers(args.workers);
  SweepResult sweep = run_rho_sweep(cfg, rho_list, args.out_dir, workers, nullptr);
  {
    std::ofstream out(fs::path(args.out_dir) / "sweep.json", std::ios::trunc);
    out << sweep_to_json(cfg, sweep).dump(2) << "\n";
  }
  std::string table = render_sweep_table(cfg, sweep);
  {
    std::ofstream out(fs::path(args.out_dir) / "sweep.txt", std::ios::trunc);
    out << table;
  }
  std::cout << table;
  for (const SweepRow& row : sweep.rows) {
    if (row.failed) {
      std::cerr << "row '" << row.label << "' failed: " << row.error << "\n";
    }
  }
  return kExitOk;
}

int cmd_verify(const CommonArgs& args, int trials) {
  std::uint64_t seed = args.seed.value_or(1);
  VerifyResult v = run_verify(trials, seed);
  fs::create_directories(args.out_dir);
  {
    std::ofstream out(fs::path(args.out_dir) / "verify.json", std::ios::trunc);
    out << verify_to_json(v).dump(2) << "\n";
  }
  for (const auto& kr : v.kinds) {
    std::cout << (kr.pass ? "[PASS] " : "[FAIL] ") << kr.kind
              << "  max rel err " << kr.report.max_rel_error << " over "
              << kr.report.trials << " instances (step " << kr.report.step << ")\n";
  }
  std::cout << (v.brute_force_pass ? "[PASS] " : "[FAIL] ")
            << "literal-likelihood cross-check  max abs diff "
            << v.brute_force_max_diff << " over " << v.brute_force_instances
            << " instances\n";
  std::cout << "report: " << (fs::path(args.out_dir) / "verify.json").string() << "\n";
  return v.overall_pass ? kExitOk : 1;
}

int cmd_replay(const CommonArgs& args, int variation, int episode) {
  ExperimentConfig cfg = resolve_config(args);
  if (args.resume.empty()) {
    throw ConfigError("replay needs --resume <checkpoint>");
  }
  EsState state = load_checkpoint(args.resume, cfg.es, config_hash(cfg));
  ReplayResult r = replay(cfg, state, variation, episode);
  std::cout << "variation " << r.variation_id << " episode " << r.episode
            << "\nepisode_seed " << r.episode_seed << "\ngenotype_seed "
            << r.genotype_seed << "\nfitness " << r.fitness << "\nsteps "
            << r.steps << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hebbian meta-learning harness: evolve plasticity rules and "
               "their assignment to synapses with evolution strategies"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, sweep_args, verify_args, replay_args;
  std::vector<int> rho_list;
  int verify_trials = 100;
  int replay_variation = 1;
  int replay_episode = 0;

  auto* train_cmd = app.add_subcommand("train", "run the meta-training loop");
  add_common(train_cmd, train_args, true);

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on all five variations");
  add_common(eval_cmd, eval_args, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate across sharing ratios plus baselines");
  add_common(sweep_cmd, sweep_args, true);
  sweep_cmd->add_option("--rho-list", rho_list, "sharing ratios to sweep");

  auto* verify_cmd = app.add_subcommand("verify", "finite-difference and literal-likelihood gradient checks");
  add_common(verify_cmd, verify_args, false);
  verify_cmd->add_option("--trials", verify_trials, "instances per model kind");

  auto* replay_cmd = app.add_subcommand("replay", "re-run one evaluation episode from a checkpoint");
  add_common(replay_cmd, replay_args, true);
  replay_cmd->add_option("--variation", replay_variation, "variation id (1..5)");
  replay_cmd->add_option("--episode", replay_episode, "episode index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, rho_list);
    if (verify_cmd->parsed()) return cmd_verify(verify_args, verify_trials);
    if (replay_cmd->parsed()) return cmd_replay(replay_args, replay_variation, replay_episode);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
