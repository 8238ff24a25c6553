#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hebbes/es.hpp"

using namespace hebbes;

namespace {

// Independent rank-with-ties oracle: rank(i) = #smaller + (#equal - 1)/2.
std::vector<double> rank_oracle(const std::vector<double>& raw) {
  const std::size_t n = raw.size();
  std::vector<double> shaped(n);
  for (std::size_t i = 0; i < n; ++i) {
    int smaller = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (raw[j] < raw[i]) ++smaller;
      if (raw[j] == raw[i]) ++equal;
    }
    double rank = smaller + 0.5 * (equal - 1);
    shaped[i] = rank / (n - 1) - 0.5;
  }
  double mean = 0.0;
  for (double s : shaped) mean += s;
  mean /= n;
  for (double& s : shaped) s -= mean;
  return shaped;
}

Matrix regen_eps(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix eps(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) eps(r, c) = rng.normal();
  return eps;
}

}  // namespace

TEST_CASE("current_lr follows the exponential schedule") {
  EsConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.decay = 1.0;
  CHECK(current_lr(cfg, 0) == 0.2);
  CHECK(current_lr(cfg, 500) == 0.2);

  cfg.learning_rate = 1.0;
  cfg.decay = 0.9931;
  CHECK(current_lr(cfg, 0) == 1.0);
  double ratio = current_lr(cfg, 100) / current_lr(cfg, 0);
  CHECK(std::abs(ratio - 0.5) / 0.5 < 1e-3);  // halves every 100 updates
  CHECK_THROWS_AS(current_lr(cfg, -1), std::invalid_argument);
}

TEST_CASE("centered-rank shaping basics") {
  CHECK(shape_fitness({5.0, 5.0, 5.0}, Shaping::CenteredRanks) ==
        std::vector<double>{0.0, 0.0, 0.0});
  CHECK(shape_fitness({1.0, 2.0, 3.0}, Shaping::CenteredRanks) ==
        std::vector<double>{-0.5, 0.0, 0.5});
  CHECK(shape_fitness({4.0, -1.0}, Shaping::Raw) == std::vector<double>{4.0, -1.0});
  CHECK_THROWS_AS(shape_fitness({1.0}, Shaping::CenteredRanks), std::invalid_argument);
  CHECK_THROWS_AS(shape_fitness({1.0, std::nan("")}, Shaping::CenteredRanks),
                  std::invalid_argument);
}

TEST_CASE("tied ranks match the independent oracle") {
  std::vector<std::vector<double>> cases = {
      {3.0, 1.0, 2.0, 2.0},
      {0.0, 0.0, 1.0, -1.0, 1.0},
      {7.0, 7.0, 7.0, 7.0, 1.0},
  };
  for (const auto& raw : cases) {
    auto shaped = shape_fitness(raw, Shaping::CenteredRanks);
    auto expected = rank_oracle(raw);
    REQUIRE(shaped.size() == expected.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(shaped[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    }
    double sum = 0.0;
    for (double s : shaped) sum += s;
    CHECK(std::abs(sum) < 1e-12);  // zero mean
  }
}

TEST_CASE("fitness reports keep raw values and zero-mean shaped values") {
  Rng rng(19);
  std::vector<double> raw(17);
  for (double& f : raw) f = rng.normal() * 3.0;
  FitnessReport report = make_fitness_report(raw, Shaping::CenteredRanks);
  CHECK(report.raw == raw);
  double sum = 0.0;
  for (double s : report.shaped) sum += s;
  CHECK(std::abs(sum) < 1e-12);
  FitnessReport identity = make_fitness_report(raw, Shaping::Raw);
  CHECK(identity.shaped == raw);
}

TEST_CASE("rank shaping is invariant to monotone transformations") {
  Rng rng(17);
  std::vector<double> raw(32);
  for (double& f : raw) f = rng.normal() * 5.0;
  std::vector<double> warped(32);
  for (std::size_t i = 0; i < raw.size(); ++i) warped[i] = std::exp(0.3 * raw[i]) - 2.0;
  CHECK(shape_fitness(raw, Shaping::CenteredRanks) ==
        shape_fitness(warped, Shaping::CenteredRanks));
}

TEST_CASE("population sampling is deterministic with mirrored pairs") {
  GenotypeModel model = GenotypeModel::per_synapse(6, kRuleDim, 0.1);
  model.init_mu_gaussian(1.0, 3);
  EsConfig cfg;
  cfg.population_size = 128;
  cfg.antithetic = true;

  auto pop1 = sample_population(model, cfg, 4, 99);
  auto pop2 = sample_population(model, cfg, 4, 99);
  REQUIRE(pop1.size() == 128);
  for (std::size_t j = 0; j < pop1.size(); ++j) {
    CHECK((pop1[j].genotype.h - pop2[j].genotype.h).cwiseAbs().maxCoeff() == 0.0);
  }

  // 64 mirrored pairs; the pair shares its sampling seed and its perturbation
  for (int p = 0; p < 64; ++p) {
    CHECK(pop1[2 * p].sample_seed == pop1[2 * p + 1].sample_seed);
    Matrix eps = regen_eps(6, kRuleDim, pop1[2 * p].sample_seed);
    CHECK((pop1[2 * p].genotype.h - (model.mu() + 0.1 * eps)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pop1[2 * p + 1].genotype.h - (model.mu() - 0.1 * eps)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pop1[2 * p].genotype.h + pop1[2 * p + 1].genotype.h - 2.0 * model.mu())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  }

  auto pop3 = sample_population(model, cfg, 5, 99);
  CHECK((pop1[0].genotype.h - pop3[0].genotype.h).cwiseAbs().maxCoeff() > 0.0);

  cfg.population_size = 7;
  CHECK_THROWS_AS(sample_population(model, cfg, 0, 99), std::invalid_argument);
}

TEST_CASE("mirrored pairs sum to twice the mean exactly at zero mean") {
  GenotypeModel model = GenotypeModel::per_synapse(4, kRuleDim, 0.1);  // mu = 0
  EsConfig cfg;
  cfg.population_size = 8;
  auto pop = sample_population(model, cfg, 0, 7);
  for (int p = 0; p < 4; ++p) {
    CHECK((pop[2 * p].genotype.h + pop[2 * p + 1].genotype.h).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gmm models sample candidates independently") {
  GenotypeModel model = GenotypeModel::shared_gmm(5, 2, kRuleDim, 0.1);
  model.init_mu_gaussian(1.0, 4);
  EsConfig cfg;
  cfg.population_size = 6;
  cfg.antithetic = true;  // mirroring is undefined across a categorical draw
  auto pop = sample_population(model, cfg, 0, 11);
  CHECK(pop.size() == 6);
  CHECK(pop[0].sample_seed != pop[1].sample_seed);
}

TEST_CASE("constant fitness gives an exactly zero rank-shaped gradient") {
  GenotypeModel model = GenotypeModel::per_synapse(5, kRuleDim, 0.1);
  model.init_mu_gaussian(1.0, 5);
  EsConfig cfg;
  cfg.population_size = 16;
  auto pop = sample_population(model, cfg, 0, 13);
  std::vector<double> raw(16, 3.25);
  auto shaped = shape_fitness(raw, Shaping::CenteredRanks);
  ParamGrad grad = estimate_gradient(pop, shaped, model);
  CHECK(grad.mu.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a mirrored pair with equal fitness cancels exactly at zero mean") {
  GenotypeModel model = GenotypeModel::per_synapse(4, kRuleDim, 0.1);  // mu = 0
  EsConfig cfg;
  cfg.population_size = 2;
  auto pop = sample_population(model, cfg, 0, 21);
  std::vector<double> shaped = {0.7, 0.7};  // raw mode semantics
  ParamGrad grad = estimate_gradient(pop, shaped, model);
  CHECK(grad.mu.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("estimate_gradient matches a direct summation oracle") {
  GenotypeModel model = GenotypeModel::shared_gmm(4, 2, kRuleDim, 0.15);
  model.init_mu_gaussian(0.5, 6);
  EsConfig cfg;
  cfg.population_size = 4;
  cfg.antithetic = false;
  auto pop = sample_population(model, cfg, 2, 31);
  std::vector<double> shaped = {0.4, -0.1, 0.3, -0.6};

  ParamGrad expected = model.zero_grad();
  for (int j = 0; j < 4; ++j) {
    ParamGrad g = model.grad_log_prob(pop[j].genotype);
    expected.mu += shaped[j] * g.mu;
    expected.lambda += shaped[j] * g.lambda;
  }
  expected.mu /= 4.0;
  expected.lambda /= 4.0;

  ParamGrad grad = estimate_gradient(pop, shaped, model);
  CHECK((grad.mu - expected.mu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((grad.lambda - expected.lambda).cwiseAbs().maxCoeff() < 1e-12);

  shaped.pop_back();
  CHECK_THROWS_AS(estimate_gradient(pop, shaped, model), std::invalid_argument);
}

TEST_CASE("closed-form mean update equals the generic score-function path") {
  Rng trial_rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    int rows = 2 + static_cast<int>(trial_rng.next_u64() % 6);
    double sigma = 0.05 + 0.2 * trial_rng.uniform();
    double alpha = 0.05 + 0.3 * trial_rng.uniform();
    GenotypeModel model = GenotypeModel::per_synapse(rows, kRuleDim, sigma);
    model.init_mu_gaussian(1.0, 700 + trial);

    EsConfig cfg;
    cfg.population_size = 16;
    cfg.learning_rate = alpha;
    cfg.shaping = Shaping::Raw;
    std::uint64_t base = 900 + trial;
    auto pop = sample_population(model, cfg, 0, base);

    std::vector<double> shaped(16);
    for (double& s : shaped) s = trial_rng.normal();

    // generic route: score gradient from h, then one sgd step
    EsState state(model, cfg, base);
    ParamGrad grad = estimate_gradient(pop, shaped, model);
    sgd_update(state, cfg, grad);

    // closed-form route: alpha/(n*sigma) * sum of shaped * eps
    std::vector<Matrix> eps;
    for (int p = 0; p < 8; ++p) {
      Matrix e = regen_eps(rows, kRuleDim, pop[2 * p].sample_seed);
      eps.push_back(e);
      eps.push_back(-e);
    }
    Matrix fast = per_synapse_fast_update(model.mu(), eps, shaped, alpha, sigma);

    double scale = std::max(1.0, fast.cwiseAbs().maxCoeff());
    CHECK((fast - state.model.mu()).cwiseAbs().maxCoeff() / scale < 1e-10);
  }
}

TEST_CASE("per_synapse_fast_update pointwise cases") {
  Matrix mu = Matrix::Constant(2, kRuleDim, 0.5);
  std::vector<Matrix> eps = {Matrix::Zero(2, kRuleDim)};
  eps[0](0, 0) = 1.0;  // e1

  Matrix same = per_synapse_fast_update(mu, eps, {0.0}, 0.3, 0.1);
  CHECK((same - mu).cwiseAbs().maxCoeff() == 0.0);

  Matrix moved = per_synapse_fast_update(mu, eps, {1.0}, 0.3, 0.1);
  CHECK(moved(0, 0) == doctest::Approx(0.5 + 0.3 / 0.1).epsilon(1e-14));
  CHECK(moved(1, 3) == 0.5);

  CHECK_THROWS_AS(per_synapse_fast_update(mu, eps, {1.0, 2.0}, 0.3, 0.1),
                  std::invalid_argument);
}

TEST_CASE("sgd update applies the scheduled step and advances the generation") {
  GenotypeModel model = GenotypeModel::per_synapse(2, kRuleDim, 0.1);
  EsConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.decay = 0.5;
  EsState state(model, cfg, 1);

  ParamGrad zero = state.model.zero_grad();
  sgd_update(state, cfg, zero);
  CHECK(state.model.mu().cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.generation == 1);

  ParamGrad g = state.model.zero_grad();
  g.mu.setConstant(2.0);
  sgd_update(state, cfg, g);  // generation 1: lr = 1.0 * 0.5
  CHECK(state.model.mu()(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  sgd_update(state, cfg, g);  // generation 2: lr = 0.25
  CHECK(state.model.mu()(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(state.generation == 3);
}

TEST_CASE("adam update matches a scalar reference trace") {
  GenotypeModel model = GenotypeModel::per_synapse(1, 1, 0.1);
  EsConfig cfg;
  cfg.updater = Updater::Adam;
  cfg.learning_rate = 0.1;
  cfg.adam_beta1 = 0.9;
  cfg.adam_beta2 = 0.999;
  cfg.adam_epsilon = 1e-8;
  EsState state(model, cfg, 1);

  double theta = 0.0, m = 0.0, v = 0.0;
  std::vector<double> grads = {0.5, -1.25, 0.75};
  for (int t = 1; t <= 3; ++t) {
    double g = grads[t - 1];
    ParamGrad pg = state.model.zero_grad();
    pg.mu(0, 0) = g;
    adam_update(state, cfg, pg);

    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    double m_hat = m / (1.0 - std::pow(0.9, t));
    double v_hat = v / (1.0 - std::pow(0.999, t));
    theta += 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(state.model.mu()(0, 0) == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("adam from a fresh state ignores a zero gradient") {
  GenotypeModel model = GenotypeModel::shared_gmm(3, 2, kRuleDim, 0.1);
  model.init_mu_gaussian(1.0, 8);
  EsConfig cfg;
  cfg.updater = Updater::Adam;
  EsState state(model, cfg, 1);
  Matrix mu_before = state.model.mu();
  adam_update(state, cfg, state.model.zero_grad());
  CHECK((state.model.mu() - mu_before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.generation == 1);
}

TEST_CASE("adam converges to unit-magnitude steps under a constant gradient") {
  GenotypeModel model = GenotypeModel::per_synapse(1, 1, 0.1);
  EsConfig cfg;
  cfg.updater = Updater::Adam;
  cfg.learning_rate = 0.01;
  EsState state(model, cfg, 1);
  ParamGrad g = state.model.zero_grad();
  g.mu(0, 0) = 0.37;
  double prev = 0.0;
  double step = 0.0;
  for (int t = 0; t < 200; ++t) {
    adam_update(state, cfg, g);
    step = state.model.mu()(0, 0) - prev;
    prev = state.model.mu()(0, 0);
  }
  CHECK(step == doctest::Approx(0.01).epsilon(1e-3));  // lr * |g|/sqrt(g^2)
}

TEST_CASE("adam moments stay finite over many random steps") {
  GenotypeModel model = GenotypeModel::per_synapse(2, kRuleDim, 0.1);
  EsConfig cfg;
  cfg.updater = Updater::Adam;
  cfg.learning_rate = 1e-3;
  EsState state(model, cfg, 1);
  Rng rng(23);
  for (int t = 0; t < 10000; ++t) {
    ParamGrad g = state.model.zero_grad();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < kRuleDim; ++c) g.mu(r, c) = 10.0 * rng.normal();
    adam_update(state, cfg, g);
  }
  CHECK(state.model.mu().allFinite());
  CHECK(state.adam_m.mu.allFinite());
  CHECK(state.adam_v.mu.allFinite());
  CHECK(state.adam_v.mu.minCoeff() >= 0.0);
}

TEST_CASE("run_es aborts on non-finite fitness without touching parameters") {
  GenotypeModel model = GenotypeModel::per_synapse(2, kRuleDim, 0.1);
  model.init_mu_gaussian(1.0, 9);
  EsConfig cfg;
  cfg.population_size = 4;
  EsState state(model, cfg, 2);
  Matrix mu_before = state.model.mu();

  auto bad_fitness = [](const std::vector<Candidate>& pop, long) {
    std::vector<double> f(pop.size(), std::numeric_limits<double>::quiet_NaN());
    return f;
  };
  TrainStatus status = run_es(state, cfg, bad_fitness, 5);
  CHECK(status == TrainStatus::NumericalAbort);
  CHECK(state.generation == 0);
  CHECK((state.model.mu() - mu_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_es improves a quadratic surrogate and reports records") {
  const int rows = 3;
  GenotypeModel model = GenotypeModel::per_synapse(rows, kRuleDim, 0.1);
  Matrix target = Matrix::Constant(rows, kRuleDim, 0.4);
  model.mu().setConstant(-0.6);

  EsConfig cfg;
  cfg.population_size = 32;
  cfg.learning_rate = 0.1;
  EsState state(model, cfg, 5);
  double initial_dist = (state.model.mu() - target).cwiseAbs().maxCoeff();

  auto fitness = [&](const std::vector<Candidate>& pop, long) {
    std::vector<double> f(pop.size());
    for (std::size_t j = 0; j < pop.size(); ++j) {
      f[j] = -(pop[j].genotype.h - target).squaredNorm();
    }
    return f;
  };
  std::vector<GenerationRecord> records;
  TrainStatus status = run_es(state, cfg, fitness, 30,
                              [&](const GenerationRecord& r) { records.push_back(r); });
  CHECK(status == TrainStatus::Done);
  CHECK(records.size() == 30);
  CHECK(records.front().generation == 0);
  CHECK(records.back().generation == 29);
  CHECK(records.front().lr == 0.1);
  CHECK_FALSE(records.front().grad_lambda_inf.has_value());
  CHECK((state.model.mu() - target).cwiseAbs().maxCoeff() < initial_dist * 0.5);
}
