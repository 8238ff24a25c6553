#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hebbes/checkpoint.hpp"
#include "hebbes/config.hpp"
#include "hebbes/gradcheck.hpp"

namespace hebbes {

// Index-slotted parallel map: results are written into per-index slots, so
// any worker count produces identical output.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

struct RolloutOptions {
  Topology topology;
  BaselineKind baseline = BaselineKind::Hebbian;
  double weight_clip = 3.0;
  double init_low = -0.1;
  double init_high = 0.1;
};

RolloutOptions rollout_options(const ExperimentConfig& cfg);

// One episode. Hebbian: random weight init from the episode seed, then
// {forward, env step, hebbian step} until done. Static: the genotype is the
// weight vector, no plasticity. Recurrent: genotype is the parameter vector,
// state zeroed at episode start. A diverged policy forfeits with the
// environment floor fitness instead of raising.
EpisodeResult rollout(const Genotype& g, const EnvSpec& spec,
                      std::uint64_t episode_seed, const RolloutOptions& opt);

// Mean rollout fitness over the meta-task's training variations; seeds are
// consumed one per (variation, episode) in variation-major order.
double meta_fitness(const Genotype& g, const MetaTask& meta,
                    std::span<const std::uint64_t> episode_seeds,
                    const RolloutOptions& opt);

// Deterministic genotype at the center of the model distribution.
Genotype mean_genotype(const GenotypeModel& model);

nlohmann::json generation_record_to_json(const GenerationRecord& rec);

// ----- training -----

struct TrainResult {
  TrainStatus status = TrainStatus::Done;
  long generation = 0;
  std::filesystem::path checkpoint_path;
};

// Runs the generational loop for cfg, writing into out_dir:
//   config.resolved.json, history.jsonl, periodic + final checkpoints
// (checkpoint_diagnostic.bin with the last finite parameters on numerical
// abort). Fully deterministic for a fixed config and seed at any worker
// count.
TrainResult train(const ExperimentConfig& cfg, const std::string& out_dir,
                  int workers, const std::string& resume_checkpoint = "",
                  const GenerationCallback& progress = nullptr);

// ----- evaluation -----

struct EvalCell {
  int variation_id = 0;
  std::string variation;
  bool held_out = false;
  int episodes = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population formula over exactly `episodes` values
  std::vector<double> fitness;
  std::vector<std::uint64_t> episode_seeds;
};

using RolloutFn =
    std::function<double(const Genotype&, const EnvSpec&, std::uint64_t)>;

// Core evaluation protocol: per spec, `episodes` rollouts with documented
// per-episode seeds, a fresh genotype sampled per rollout (or the mean
// genotype under EvalGenotypeMode::Mean). The rollout function is injectable
// so the statistics path can be exercised against known fitness values.
std::vector<EvalCell> evaluate_model(const GenotypeModel& model,
                                     const std::vector<EnvSpec>& specs,
                                     int episodes, std::uint64_t base_seed,
                                     EvalGenotypeMode mode, int held_out_id,
                                     int workers, const RolloutFn& rollout_fn);

// Evaluation over all five task variations with the config's rollout.
std::vector<EvalCell> evaluate(const ExperimentConfig& cfg, const EsState& state,
                               int workers);

nlohmann::json eval_to_json(const ExperimentConfig& cfg,
                            const std::vector<EvalCell>& cells);
// Rounded-to-integer display table; the held-out column is flagged. Full
// precision lives in the JSON only.
std::string render_eval_table(const std::string& label,
                              const std::vector<EvalCell>& cells);
void write_evaluation(const ExperimentConfig& cfg,
                      const std::vector<EvalCell>& cells,
                      const std::string& out_dir);

// ----- rho sweep -----

struct SweepRow {
  std::string label;
  std::string run_dir;
  bool failed = false;
  std::string error;
  std::vector<EvalCell> cells;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Three baseline rows (static, recurrent, per-synapse hebbian) plus one row
// per sharing ratio; each row trains under the shared config and evaluates on
// all five variations. Row failures are recorded and the sweep continues.
SweepResult run_rho_sweep(const ExperimentConfig& base,
                          const std::vector<int>& rho_list,
                          const std::string& out_dir, int workers,
                          const GenerationCallback& progress = nullptr);

nlohmann::json sweep_to_json(const ExperimentConfig& base, const SweepResult& sweep);
std::string render_sweep_table(const ExperimentConfig& base, const SweepResult& sweep);

// ----- verification -----

struct VerifyResult {
  struct KindReport {
    std::string kind;
    GradCheckReport report;
    bool pass = false;
  };
  std::vector<KindReport> kinds;
  double brute_force_max_diff = 0.0;
  int brute_force_instances = 0;
  int brute_force_skipped = 0;
  bool brute_force_pass = false;
  bool overall_pass = false;
};

// Finite-difference checks for every model kind plus the literal-likelihood
// cross-check; the gate a training run should pass before being trusted.
VerifyResult run_verify(int trials_per_kind, std::uint64_t seed,
                        double tolerance = 1e-4);
nlohmann::json verify_to_json(const VerifyResult& v);

// ----- replay -----

struct ReplayResult {
  int variation_id = 0;
  int episode = 0;
  std::uint64_t episode_seed = 0;
  std::uint64_t genotype_seed = 0;
  double fitness = 0.0;
  int steps = 0;
};

// Re-runs one evaluation episode from a checkpoint with the exact seed
// derivation the evaluation protocol uses; an audit tool for determinism.
ReplayResult replay(const ExperimentConfig& cfg, const EsState& state,
                    int variation_id, int episode);

}  // namespace hebbes
