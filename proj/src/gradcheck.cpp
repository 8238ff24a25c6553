#include "hebbes/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hebbes {

double relative_error(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

Vector finite_diff(const std::function<double(const Vector&)>& fn,
                   const Vector& theta, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  Vector grad(theta.size());
  Vector probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    double hi = fn(probe);
    probe[i] = theta[i] - step;
    double lo = fn(probe);
    probe[i] = theta[i];
    double g = (hi - lo) / (2.0 * step);
    grad[i] = std::isfinite(g) ? g : std::numeric_limits<double>::quiet_NaN();
  }
  return grad;
}

std::optional<double> brute_force_gmm_log_prob(const Matrix& mu,
                                               const Matrix& lambda,
                                               double sigma, const Matrix& h) {
  const int n = static_cast<int>(h.rows());
  const int m = static_cast<int>(mu.rows());
  const int c = static_cast<int>(h.cols());
  if (mu.cols() != c || lambda.rows() != n || lambda.cols() != m) {
    throw std::invalid_argument("dimension mismatch");
  }
  double s2 = sigma * sigma;
  double norm_const = std::pow(2.0 * std::numbers::pi * s2, -0.5 * c);
  double product = 1.0;
  for (int i = 0; i < n; ++i) {
    double z = 0.0;
    for (int k = 0; k < m; ++k) z += std::exp(lambda(i, k));
    double mix = 0.0;
    for (int k = 0; k < m; ++k) {
      double q = (h.row(i) - mu.row(k)).squaredNorm();
      double density = norm_const * std::exp(-q / (2.0 * s2));
      mix += density * (std::exp(lambda(i, k)) / z);
    }
    product *= mix;
  }
  if (product <= 0.0 || !std::isfinite(product)) return std::nullopt;
  return std::log(product);
}

namespace {

Vector flatten_theta(const GenotypeModel& model) {
  Eigen::Index n = model.mu().size() + model.lambda().size();
  Vector theta(n);
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < model.mu().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.mu().cols(); ++c) theta[idx++] = model.mu()(r, c);
  }
  for (Eigen::Index r = 0; r < model.lambda().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.lambda().cols(); ++c) theta[idx++] = model.lambda()(r, c);
  }
  return theta;
}

void write_theta(GenotypeModel& model, const Vector& theta) {
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < model.mu().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.mu().cols(); ++c) model.mu()(r, c) = theta[idx++];
  }
  for (Eigen::Index r = 0; r < model.lambda().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.lambda().cols(); ++c) model.lambda()(r, c) = theta[idx++];
  }
}

// Means are drawn within about one sigma of a shared center so every mixture
// component keeps non-negligible responsibility: central differences at step
// 1e-5 have an absolute noise floor around 1e-12, and gradients through
// effectively-dead components fall below it.
GenotypeModel random_model(ModelKind kind, int rows, int components, double sigma,
                           Rng& rng) {
  GenotypeModel model = [&] {
    switch (kind) {
      case ModelKind::PerSynapse:
        return GenotypeModel::per_synapse(rows, kRuleDim, sigma);
      case ModelKind::SharedGmm:
        return GenotypeModel::shared_gmm(rows, components, kRuleDim, sigma);
      case ModelKind::JointGmm:
        return GenotypeModel::joint_gmm(rows, components, kRuleDim, sigma);
      case ModelKind::SingleRule:
        return GenotypeModel::single_rule(rows, kRuleDim, sigma);
      case ModelKind::FixedRandom:
        return GenotypeModel::fixed_random(rows, components, kRuleDim, sigma,
                                           rng.next_u64());
    }
    throw std::logic_error("unreachable");
  }();
  Eigen::RowVectorXd center(kRuleDim);
  for (int c = 0; c < kRuleDim; ++c) center[c] = rng.normal();
  for (Eigen::Index r = 0; r < model.mu().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.mu().cols(); ++c) {
      model.mu()(r, c) = center[c] + sigma * rng.normal();
    }
  }
  for (Eigen::Index r = 0; r < model.lambda().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.lambda().cols(); ++c) {
      model.lambda()(r, c) = rng.normal();
    }
  }
  return model;
}

// Genotype with every rule within 3 sigma of its component mean, so the
// finite-difference probes stay in a well-conditioned density region.
Genotype random_genotype(const GenotypeModel& model, Rng& rng) {
  Genotype g;
  g.h.resize(model.rows(), model.cols());
  bool keep_k = model.kind() == ModelKind::JointGmm;
  if (keep_k) g.k.resize(model.rows());
  for (int i = 0; i < model.rows(); ++i) {
    int k = 0;
    switch (model.kind()) {
      case ModelKind::PerSynapse: k = i; break;
      case ModelKind::FixedRandom: k = model.fixed_assignment()[i]; break;
      case ModelKind::SingleRule: k = 0; break;
      default:
        k = static_cast<int>(rng.next_u64() % model.components());
        break;
    }
    if (keep_k) g.k[i] = k;
    for (int c = 0; c < model.cols(); ++c) {
      double eps = std::clamp(rng.normal(), -3.0, 3.0);
      g.h(i, c) = model.mu()(k, c) + model.sigma() * eps;
    }
  }
  return g;
}

}  // namespace

GradCheckReport check_model_gradients(ModelKind kind, int trials,
                                      std::uint64_t seed, double step) {
  GradCheckReport report;
  report.step = step;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(seed, SeedPurpose::PopulationSample, trial));
    int rows = 1 + static_cast<int>(rng.next_u64() % 8);
    int components = 1 + static_cast<int>(rng.next_u64() % 3);
    double sigma = 0.05 + 0.25 * rng.uniform();
    GenotypeModel model = random_model(kind, rows, components, sigma, rng);
    Genotype g = random_genotype(model, rng);
    if (kind == ModelKind::SharedGmm || kind == ModelKind::SingleRule) {
      // Stay inside the oracle's trusted regime (see random_model).
      int attempts = 0;
      while (model.responsibilities(g.h).minCoeff() < 1e-6 && attempts < 50) {
        model = random_model(kind, rows, components, sigma, rng);
        g = random_genotype(model, rng);
        ++attempts;
      }
      if (model.responsibilities(g.h).minCoeff() < 1e-6) {
        ++report.skipped;
        continue;
      }
    }

    ParamGrad analytic = model.grad_log_prob(g);
    Vector analytic_flat(model.mu().size() + model.lambda().size());
    {
      Eigen::Index idx = 0;
      for (Eigen::Index r = 0; r < analytic.mu.rows(); ++r) {
        for (Eigen::Index c = 0; c < analytic.mu.cols(); ++c) {
          analytic_flat[idx++] = analytic.mu(r, c);
        }
      }
      for (Eigen::Index r = 0; r < analytic.lambda.rows(); ++r) {
        for (Eigen::Index c = 0; c < analytic.lambda.cols(); ++c) {
          analytic_flat[idx++] = analytic.lambda(r, c);
        }
      }
    }

    GenotypeModel probe = model;
    auto fn = [&](const Vector& theta) {
      write_theta(probe, theta);
      return probe.log_prob(g);
    };
    Vector numeric = finite_diff(fn, flatten_theta(model), step);

    bool skipped = false;
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      if (std::isnan(numeric[i])) {
        skipped = true;
        break;
      }
      double err = relative_error(analytic_flat[i], numeric[i]);
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        Eigen::Index mu_size = model.mu().size();
        std::string block = i < mu_size ? "mu" : "lambda";
        Eigen::Index j = i < mu_size ? i : i - mu_size;
        Eigen::Index cols = i < mu_size ? model.mu().cols() : model.lambda().cols();
        report.argmax_coordinate = "trial " + std::to_string(trial) + " " + block +
                                   "(" + std::to_string(j / cols) + "," +
                                   std::to_string(j % cols) + ")";
      }
    }
    if (skipped) {
      ++report.skipped;
    } else {
      ++report.trials;
    }
  }
  return report;
}

}  // namespace hebbes
