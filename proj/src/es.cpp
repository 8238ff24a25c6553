#include "hebbes/es.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hebbes {

std::string to_string(Updater u) {
  return u == Updater::Sgd ? "sgd" : "adam";
}

Updater updater_from_string(const std::string& s) {
  if (s == "sgd") return Updater::Sgd;
  if (s == "adam") return Updater::Adam;
  throw std::invalid_argument("unknown updater: " + s);
}

std::string to_string(Shaping s) {
  return s == Shaping::CenteredRanks ? "centered-ranks" : "raw";
}

Shaping shaping_from_string(const std::string& s) {
  if (s == "centered-ranks") return Shaping::CenteredRanks;
  if (s == "raw") return Shaping::Raw;
  throw std::invalid_argument("unknown fitness shaping: " + s);
}

void EsConfig::validate(bool model_supports_antithetic) const {
  if (population_size < 2) {
    throw std::invalid_argument("population size must be at least 2");
  }
  if (antithetic && model_supports_antithetic && population_size % 2 != 0) {
    throw std::invalid_argument("population size must be even with antithetic sampling");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (!(decay > 0.0) || decay > 1.0) {
    throw std::invalid_argument("decay must lie in (0, 1]");
  }
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) {
    throw std::invalid_argument("adam epsilon must be positive");
  }
}

EsState::EsState(GenotypeModel m, const EsConfig& cfg, std::uint64_t seed)
    : model(std::move(m)), base_seed(seed) {
  if (cfg.updater == Updater::Adam) {
    adam_m = model.zero_grad();
    adam_v = model.zero_grad();
  }
}

double current_lr(const EsConfig& cfg, long generation) {
  if (generation < 0) throw std::invalid_argument("generation must be >= 0");
  return cfg.learning_rate * std::pow(cfg.decay, static_cast<double>(generation));
}

std::vector<double> shape_fitness(const std::vector<double>& raw, Shaping mode) {
  const std::size_t n = raw.size();
  if (n < 2) throw std::invalid_argument("fitness shaping needs at least 2 values");
  for (double f : raw) {
    if (!std::isfinite(f)) throw std::invalid_argument("non-finite fitness value");
  }
  if (mode == Shaping::Raw) return raw;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });

  // Average rank over tie groups, then map ranks [0, n-1] onto [-0.5, 0.5].
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && raw[order[j + 1]] == raw[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j));
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  std::vector<double> shaped(n);
  double denom = static_cast<double>(n - 1);
  for (std::size_t t = 0; t < n; ++t) shaped[t] = rank[t] / denom - 0.5;
  double mean = std::accumulate(shaped.begin(), shaped.end(), 0.0) / static_cast<double>(n);
  for (double& s : shaped) s -= mean;
  return shaped;
}

FitnessReport make_fitness_report(const std::vector<double>& raw, Shaping mode) {
  FitnessReport report;
  report.raw = raw;
  report.shaped = shape_fitness(raw, mode);
  return report;
}

namespace {

Matrix standard_normal_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix eps(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) eps(r, c) = rng.normal();
  }
  return eps;
}

}  // namespace

std::vector<Candidate> sample_population(const GenotypeModel& model,
                                         const EsConfig& cfg, long generation,
                                         std::uint64_t base_seed) {
  bool mirrored = cfg.antithetic && model.kind() == ModelKind::PerSynapse;
  cfg.validate(model.kind() == ModelKind::PerSynapse);
  std::vector<Candidate> pop(cfg.population_size);
  if (mirrored) {
    for (int p = 0; p < cfg.population_size / 2; ++p) {
      std::uint64_t seed = derive_seed(base_seed, SeedPurpose::PopulationSample,
                                       static_cast<std::uint64_t>(generation), p);
      Matrix eps = standard_normal_matrix(model.rows(), model.cols(), seed);
      pop[2 * p].genotype.h = model.mu() + model.sigma() * eps;
      pop[2 * p].sample_seed = seed;
      pop[2 * p + 1].genotype.h = model.mu() - model.sigma() * eps;
      pop[2 * p + 1].sample_seed = seed;
    }
  } else {
    for (int j = 0; j < cfg.population_size; ++j) {
      std::uint64_t seed = derive_seed(base_seed, SeedPurpose::PopulationSample,
                                       static_cast<std::uint64_t>(generation), j);
      pop[j].genotype = model.sample(seed);
      pop[j].sample_seed = seed;
    }
  }
  return pop;
}

ParamGrad estimate_gradient(const std::vector<Candidate>& population,
                            const std::vector<double>& shaped,
                            const GenotypeModel& model) {
  if (population.size() != shaped.size()) {
    throw std::invalid_argument("population and fitness lengths differ");
  }
  ParamGrad acc = model.zero_grad();
  for (std::size_t j = 0; j < population.size(); ++j) {
    model.accumulate_grad_log_prob(population[j].genotype, shaped[j], acc);
  }
  double scale = 1.0 / static_cast<double>(population.size());
  acc.mu *= scale;
  if (acc.lambda.size() > 0) acc.lambda *= scale;
  return acc;
}

Matrix per_synapse_fast_update(const Matrix& mu,
                               const std::vector<Matrix>& eps_samples,
                               const std::vector<double>& shaped, double alpha,
                               double sigma) {
  if (eps_samples.size() != shaped.size()) {
    throw std::invalid_argument("sample and fitness lengths differ");
  }
  if (eps_samples.empty()) return mu;
  Matrix acc = Matrix::Zero(mu.rows(), mu.cols());
  for (std::size_t j = 0; j < eps_samples.size(); ++j) {
    if (eps_samples[j].rows() != mu.rows() || eps_samples[j].cols() != mu.cols()) {
      throw std::invalid_argument("perturbation shape does not match mu");
    }
    acc.noalias() += shaped[j] * eps_samples[j];
  }
  double scale = alpha / (sigma * static_cast<double>(eps_samples.size()));
  return mu + scale * acc;
}

void sgd_update(EsState& state, const EsConfig& cfg, const ParamGrad& grad) {
  state.model.apply_step(grad, current_lr(cfg, state.generation));
  ++state.generation;
}

void adam_update(EsState& state, const EsConfig& cfg, const ParamGrad& grad) {
  if (state.adam_m.mu.size() == 0) {
    throw std::logic_error("adam moments not initialized");
  }
  double lr = current_lr(cfg, state.generation);
  long t = state.generation + 1;
  double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));

  auto update_block = [&](Matrix& theta, Matrix& m, Matrix& v, const Matrix& g) {
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw std::invalid_argument("gradient block has wrong shape");
    }
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    Matrix m_hat = m / bc1;
    Matrix v_hat = v / bc2;
    theta.array() += lr * m_hat.array() / (v_hat.array().sqrt() + cfg.adam_epsilon);
  };

  update_block(state.model.mu(), state.adam_m.mu, state.adam_v.mu, grad.mu);
  if (state.model.has_lambda()) {
    update_block(state.model.lambda(), state.adam_m.lambda, state.adam_v.lambda,
                 grad.lambda);
  }
  ++state.generation;
}

void apply_update(EsState& state, const EsConfig& cfg, const ParamGrad& grad) {
  if (cfg.updater == Updater::Adam) {
    adam_update(state, cfg, grad);
  } else {
    sgd_update(state, cfg, grad);
  }
}

TrainStatus run_es(EsState& state, const EsConfig& cfg,
                   const PopulationFitnessFn& fitness_fn, long generations,
                   const GenerationCallback& on_generation) {
  while (state.generation < generations) {
    long gen = state.generation;
    std::vector<Candidate> pop =
        sample_population(state.model, cfg, gen, state.base_seed);
    std::vector<double> raw = fitness_fn(pop, gen);
    if (raw.size() != pop.size()) {
      throw std::logic_error("fitness vector length does not match population");
    }
    for (double f : raw) {
      if (!std::isfinite(f)) return TrainStatus::NumericalAbort;
    }
    FitnessReport fitness = make_fitness_report(raw, cfg.shaping);
    ParamGrad grad = estimate_gradient(pop, fitness.shaped, state.model);

    GenerationRecord rec;
    rec.generation = gen;
    rec.fitness_mean = std::accumulate(fitness.raw.begin(), fitness.raw.end(), 0.0) /
                       static_cast<double>(fitness.raw.size());
    rec.fitness_max = *std::max_element(fitness.raw.begin(), fitness.raw.end());
    rec.fitness_min = *std::min_element(fitness.raw.begin(), fitness.raw.end());
    rec.lr = current_lr(cfg, gen);
    rec.grad_mu_inf = grad.mu_inf_norm();
    if (state.model.has_lambda()) rec.grad_lambda_inf = grad.lambda_inf_norm();

    // Keep the last finite parameters so an abort can still be checkpointed.
    Matrix mu_before = state.model.mu();
    Matrix lambda_before = state.model.lambda();
    ParamGrad m_before = state.adam_m;
    ParamGrad v_before = state.adam_v;
    apply_update(state, cfg, grad);
    if (!state.model.params_finite()) {
      state.model.mu() = mu_before;
      if (state.model.has_lambda()) state.model.lambda() = lambda_before;
      state.adam_m = m_before;
      state.adam_v = v_before;
      --state.generation;
      return TrainStatus::NumericalAbort;
    }
    if (on_generation) on_generation(rec);
  }
  return TrainStatus::Done;
}

}  // namespace hebbes
