#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hebbes/genotype.hpp"

namespace hebbes {

enum class Updater { Sgd, Adam };
enum class Shaping { CenteredRanks, Raw };

std::string to_string(Updater u);
Updater updater_from_string(const std::string& s);
std::string to_string(Shaping s);
Shaping shaping_from_string(const std::string& s);

struct EsConfig {
  int population_size = 128;
  double learning_rate = 0.2;
  double decay = 1.0;  // per-generation multiplier on the learning rate
  Updater updater = Updater::Sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool antithetic = true;
  Shaping shaping = Shaping::CenteredRanks;

  void validate(bool model_supports_antithetic) const;
};

// Optimizer state. All randomness is derived from (base_seed, purpose,
// generation, index), so there is no stream state to persist: a checkpoint of
// {model, generation, moments} resumes bitwise.
struct EsState {
  GenotypeModel model;
  long generation = 0;
  std::uint64_t base_seed = 0;
  ParamGrad adam_m;  // allocated iff updater == Adam
  ParamGrad adam_v;

  EsState(GenotypeModel m, const EsConfig& cfg, std::uint64_t seed);
};

struct Candidate {
  Genotype genotype;
  std::uint64_t sample_seed = 0;
};

struct FitnessReport {
  std::vector<double> raw;
  std::vector<double> shaped;  // zero mean under centered-ranks shaping
};

double current_lr(const EsConfig& cfg, long generation);

// Centered ranks: ranks (ties averaged) mapped linearly onto [-0.5, 0.5],
// then mean-subtracted. Raw: identity.
std::vector<double> shape_fitness(const std::vector<double>& raw, Shaping mode);

FitnessReport make_fitness_report(const std::vector<double>& raw, Shaping mode);

// n candidates with seeds derived from (base_seed, generation, index). For an
// antithetic per-synapse model, candidates 2p and 2p+1 are the mirrored pair
// mu +/- sigma*eps with a shared eps draw.
std::vector<Candidate> sample_population(const GenotypeModel& model,
                                         const EsConfig& cfg, long generation,
                                         std::uint64_t base_seed);

// (1/n) sum_j shaped_j * grad log p(z_j | theta), accumulated streaming in
// candidate order into a single theta-shaped buffer.
ParamGrad estimate_gradient(const std::vector<Candidate>& population,
                            const std::vector<double>& shaped,
                            const GenotypeModel& model);

// Closed-form mean update for the per-synapse Gaussian:
//   mu <- mu + alpha * (1/(n*sigma)) * sum_j shaped_j * eps_j.
// Must agree with estimate_gradient followed by an sgd step on the same
// samples; kept as a separate arithmetic route so the two can cross-check.
Matrix per_synapse_fast_update(const Matrix& mu,
                               const std::vector<Matrix>& eps_samples,
                               const std::vector<double>& shaped, double alpha,
                               double sigma);

void sgd_update(EsState& state, const EsConfig& cfg, const ParamGrad& grad);
void adam_update(EsState& state, const EsConfig& cfg, const ParamGrad& grad);

// Dispatches on cfg.updater and advances the generation counter.
void apply_update(EsState& state, const EsConfig& cfg, const ParamGrad& grad);

struct GenerationRecord {
  long generation = 0;
  double fitness_mean = 0.0;
  double fitness_max = 0.0;
  double fitness_min = 0.0;
  double lr = 0.0;
  double grad_mu_inf = 0.0;
  std::optional<double> grad_lambda_inf;  // present only for mixture models
};

enum class TrainStatus { Done, NumericalAbort };

// Evaluates a whole population and returns one fitness per candidate, in
// candidate order. Implementations may run candidates in parallel but must
// fill slots by index.
using PopulationFitnessFn =
    std::function<std::vector<double>(const std::vector<Candidate>&, long generation)>;

using GenerationCallback = std::function<void(const GenerationRecord&)>;

// Generic generational loop: sample -> evaluate -> shape -> estimate -> update.
// Stops early with NumericalAbort if theta leaves the finite range; the state
// then still holds the last finite parameters.
TrainStatus run_es(EsState& state, const EsConfig& cfg,
                   const PopulationFitnessFn& fitness_fn, long generations,
                   const GenerationCallback& on_generation = nullptr);

}  // namespace hebbes
