#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hebbes/env.hpp"
#include "hebbes/es.hpp"

namespace hebbes {

// Bad input (config file, flags, mismatched checkpoints). The CLI maps this
// to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BaselineKind { Hebbian, Static, Recurrent };
enum class EvalGenotypeMode { Sample, Mean };

std::string to_string(BaselineKind b);
BaselineKind baseline_from_string(const std::string& s);
std::string to_string(EvalGenotypeMode m);
EvalGenotypeMode eval_mode_from_string(const std::string& s);

struct ExperimentConfig {
  TaskId task = TaskId::CartPoleVar;
  int held_out_id = 5;
  ModelKind model = ModelKind::PerSynapse;
  int rho = 1;
  int m_override = 0;  // explicit component count; overrides rho when > 0
  BaselineKind baseline = BaselineKind::Hebbian;
  std::vector<int> topology;  // defaults per task when left empty
  EsConfig es;
  long generations = 100;
  int eval_episodes = 100;
  int episodes_per_variation = 1;
  EvalGenotypeMode eval_genotype = EvalGenotypeMode::Sample;
  std::uint64_t seed = 1;
  double sigma = 0.1;
  double mu_init_std = 1.0;
  double weight_clip = 3.0;
  double init_low = -0.1;
  double init_high = 0.1;
  long checkpoint_every = 100;

  Topology make_topology() const;
  // Genotype row/column counts: one 5-column rule row per synapse for the
  // Hebbian model; one 1-column weight row per parameter for the baselines.
  int genotype_rows() const;
  int genotype_cols() const;
  int effective_components() const;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// FNV-1a over the canonical resolved-config serialization; stored in
// checkpoints so a resume against a different experiment is rejected.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Model with parameters initialized from the config's seed namespaces.
GenotypeModel build_model(const ExperimentConfig& cfg);

}  // namespace hebbes
