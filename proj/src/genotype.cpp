#include "hebbes/genotype.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hebbes {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PerSynapse: return "per-synapse";
    case ModelKind::SharedGmm: return "shared-gmm";
    case ModelKind::JointGmm: return "joint-gmm";
    case ModelKind::SingleRule: return "single-rule";
    case ModelKind::FixedRandom: return "fixed-random";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "per-synapse") return ModelKind::PerSynapse;
  if (s == "shared-gmm") return ModelKind::SharedGmm;
  if (s == "joint-gmm") return ModelKind::JointGmm;
  if (s == "single-rule") return ModelKind::SingleRule;
  if (s == "fixed-random") return ModelKind::FixedRandom;
  throw std::invalid_argument("unknown model kind: " + s);
}

int rho_to_components(int n_synapses, int rho) {
  if (rho < 1 || rho > n_synapses) {
    throw std::invalid_argument("sharing ratio must lie in [1, n_synapses]");
  }
  double m = std::round(static_cast<double>(n_synapses) / rho);
  return std::max(1, static_cast<int>(m));
}

GenotypeModel::GenotypeModel(ModelKind kind, int rows, int components, int cols,
                             double sigma)
    : kind_(kind), rows_(rows), components_(components), cols_(cols), sigma_(sigma) {
  if (rows < 1 || cols < 1 || components < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("sigma must be positive");
  }
}

GenotypeModel GenotypeModel::per_synapse(int rows, int cols, double sigma) {
  GenotypeModel m(ModelKind::PerSynapse, rows, 1, cols, sigma);
  m.mu_ = Matrix::Zero(rows, cols);
  return m;
}

GenotypeModel GenotypeModel::shared_gmm(int rows, int components, int cols,
                                        double sigma) {
  GenotypeModel m(ModelKind::SharedGmm, rows, components, cols, sigma);
  m.mu_ = Matrix::Zero(components, cols);
  m.lambda_ = Matrix::Zero(rows, components);
  return m;
}

GenotypeModel GenotypeModel::joint_gmm(int rows, int components, int cols,
                                       double sigma) {
  GenotypeModel m(ModelKind::JointGmm, rows, components, cols, sigma);
  m.mu_ = Matrix::Zero(components, cols);
  m.lambda_ = Matrix::Zero(rows, components);
  return m;
}

GenotypeModel GenotypeModel::single_rule(int rows, int cols, double sigma) {
  GenotypeModel m(ModelKind::SingleRule, rows, 1, cols, sigma);
  m.mu_ = Matrix::Zero(1, cols);
  m.lambda_ = Matrix::Zero(rows, 1);
  return m;
}

GenotypeModel GenotypeModel::fixed_random(int rows, int components, int cols,
                                          double sigma,
                                          std::uint64_t assignment_seed) {
  GenotypeModel m(ModelKind::FixedRandom, rows, components, cols, sigma);
  m.mu_ = Matrix::Zero(components, cols);
  Rng rng(assignment_seed);
  m.fixed_k_.resize(rows);
  for (int i = 0; i < rows; ++i) {
    m.fixed_k_[i] = static_cast<int>(rng.next_u64() % components);
  }
  return m;
}

GenotypeModel GenotypeModel::fixed_random_with(int rows, int components, int cols,
                                               double sigma,
                                               std::vector<int> assignment) {
  GenotypeModel m(ModelKind::FixedRandom, rows, components, cols, sigma);
  m.mu_ = Matrix::Zero(components, cols);
  if (static_cast<int>(assignment.size()) != rows) {
    throw std::invalid_argument("assignment length does not match row count");
  }
  for (int k : assignment) {
    if (k < 0 || k >= components) {
      throw std::invalid_argument("assignment component out of range");
    }
  }
  m.fixed_k_ = std::move(assignment);
  return m;
}

void GenotypeModel::init_mu_gaussian(double stddev, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index r = 0; r < mu_.rows(); ++r) {
    for (Eigen::Index c = 0; c < mu_.cols(); ++c) {
      mu_(r, c) = stddev * rng.normal();
    }
  }
}

namespace {

// log softmax of one logit row, numerically stable.
Eigen::RowVectorXd log_softmax_row(const Matrix& lambda, Eigen::Index i) {
  Eigen::RowVectorXd row = lambda.row(i);
  double mx = row.maxCoeff();
  double sum = (row.array() - mx).exp().sum();
  return (row.array() - mx - std::log(sum)).matrix();
}

double log_sum_exp(const Eigen::RowVectorXd& v) {
  double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

double GenotypeModel::log_normal_row(int i, const Matrix& h, int component_row,
                                     const Matrix& means) const {
  double q = (h.row(i) - means.row(component_row)).squaredNorm();
  double s2 = sigma_ * sigma_;
  return -0.5 * cols_ * std::log(2.0 * std::numbers::pi * s2) - q / (2.0 * s2);
}

void GenotypeModel::check_genotype(const Genotype& g) const {
  if (g.h.rows() != rows_ || g.h.cols() != cols_) {
    throw std::invalid_argument("genotype dimensions do not match model");
  }
  if (kind_ == ModelKind::JointGmm) {
    if (static_cast<int>(g.k.size()) != rows_) {
      throw std::invalid_argument("joint model requires a component per synapse");
    }
    for (int ki : g.k) {
      if (ki < 0 || ki >= components_) {
        throw std::invalid_argument("component index out of range");
      }
    }
  }
}

Genotype GenotypeModel::sample(std::uint64_t seed) const {
  Rng rng(seed);
  Genotype g;
  g.h.resize(rows_, cols_);
  switch (kind_) {
    case ModelKind::PerSynapse: {
      for (int i = 0; i < rows_; ++i) {
        for (int c = 0; c < cols_; ++c) {
          g.h(i, c) = mu_(i, c) + sigma_ * rng.normal();
        }
      }
      break;
    }
    case ModelKind::SharedGmm:
    case ModelKind::SingleRule:
    case ModelKind::JointGmm: {
      bool keep_k = (kind_ == ModelKind::JointGmm);
      if (keep_k) g.k.resize(rows_);
      std::vector<double> probs(components_);
      for (int i = 0; i < rows_; ++i) {
        Eigen::RowVectorXd lp = log_softmax_row(lambda_, i);
        for (int k = 0; k < components_; ++k) probs[k] = std::exp(lp[k]);
        int k = rng.categorical(probs);
        if (keep_k) g.k[i] = k;
        for (int c = 0; c < cols_; ++c) {
          g.h(i, c) = mu_(k, c) + sigma_ * rng.normal();
        }
      }
      break;
    }
    case ModelKind::FixedRandom: {
      g.k = fixed_k_;
      for (int i = 0; i < rows_; ++i) {
        int k = fixed_k_[i];
        for (int c = 0; c < cols_; ++c) {
          g.h(i, c) = mu_(k, c) + sigma_ * rng.normal();
        }
      }
      break;
    }
  }
  return g;
}

double GenotypeModel::log_prob(const Genotype& g) const {
  check_genotype(g);
  double total = 0.0;
  switch (kind_) {
    case ModelKind::PerSynapse: {
      for (int i = 0; i < rows_; ++i) {
        total += log_normal_row(i, g.h, i, mu_);
      }
      break;
    }
    case ModelKind::SharedGmm:
    case ModelKind::SingleRule: {
      Eigen::RowVectorXd terms(components_);
      for (int i = 0; i < rows_; ++i) {
        Eigen::RowVectorXd lp = log_softmax_row(lambda_, i);
        for (int k = 0; k < components_; ++k) {
          terms[k] = log_normal_row(i, g.h, k, mu_) + lp[k];
        }
        total += log_sum_exp(terms);
      }
      break;
    }
    case ModelKind::JointGmm: {
      for (int i = 0; i < rows_; ++i) {
        Eigen::RowVectorXd lp = log_softmax_row(lambda_, i);
        total += log_normal_row(i, g.h, g.k[i], mu_) + lp[g.k[i]];
      }
      break;
    }
    case ModelKind::FixedRandom: {
      for (int i = 0; i < rows_; ++i) {
        total += log_normal_row(i, g.h, fixed_k_[i], mu_);
      }
      break;
    }
  }
  return total;
}

Matrix GenotypeModel::responsibilities(const Matrix& h) const {
  if (!has_lambda()) {
    throw std::logic_error("responsibilities need a mixture model");
  }
  if (h.rows() != rows_ || h.cols() != cols_) {
    throw std::invalid_argument("rule matrix dimensions do not match model");
  }
  Matrix r(rows_, components_);
  Eigen::RowVectorXd terms(components_);
  for (int i = 0; i < rows_; ++i) {
    Eigen::RowVectorXd lp = log_softmax_row(lambda_, i);
    for (int k = 0; k < components_; ++k) {
      terms[k] = log_normal_row(i, h, k, mu_) + lp[k];
    }
    double lse = log_sum_exp(terms);
    for (int k = 0; k < components_; ++k) {
      r(i, k) = std::exp(terms[k] - lse);
    }
  }
  return r;
}

ParamGrad GenotypeModel::zero_grad() const {
  ParamGrad g;
  g.mu = Matrix::Zero(mu_.rows(), mu_.cols());
  if (has_lambda()) g.lambda = Matrix::Zero(lambda_.rows(), lambda_.cols());
  return g;
}

ParamGrad GenotypeModel::grad_log_prob(const Genotype& g) const {
  ParamGrad out = zero_grad();
  accumulate_grad_log_prob(g, 1.0, out);
  return out;
}

void GenotypeModel::accumulate_grad_log_prob(const Genotype& g, double weight,
                                             ParamGrad& acc) const {
  check_genotype(g);
  double inv_s2 = 1.0 / (sigma_ * sigma_);
  switch (kind_) {
    case ModelKind::PerSynapse: {
      acc.mu.noalias() += weight * inv_s2 * (g.h - mu_);
      break;
    }
    case ModelKind::SharedGmm:
    case ModelKind::SingleRule: {
      Matrix r = responsibilities(g.h);
      for (int i = 0; i < rows_; ++i) {
        Eigen::RowVectorXd lp = log_softmax_row(lambda_, i);
        for (int k = 0; k < components_; ++k) {
          acc.mu.row(k).noalias() +=
              (weight * r(i, k) * inv_s2) * (g.h.row(i) - mu_.row(k));
          acc.lambda(i, k) += weight * (r(i, k) - std::exp(lp[k]));
        }
      }
      break;
    }
    case ModelKind::JointGmm: {
      for (int i = 0; i < rows_; ++i) {
        int ki = g.k[i];
        acc.mu.row(ki).noalias() +=
            (weight * inv_s2) * (g.h.row(i) - mu_.row(ki));
        Eigen::RowVectorXd lp = log_softmax_row(lambda_, i);
        for (int k = 0; k < components_; ++k) {
          double indicator = (k == ki) ? 1.0 : 0.0;
          acc.lambda(i, k) += weight * (indicator - std::exp(lp[k]));
        }
      }
      break;
    }
    case ModelKind::FixedRandom: {
      for (int i = 0; i < rows_; ++i) {
        int ki = fixed_k_[i];
        acc.mu.row(ki).noalias() +=
            (weight * inv_s2) * (g.h.row(i) - mu_.row(ki));
      }
      break;
    }
  }
}

void GenotypeModel::apply_step(const ParamGrad& direction, double step) {
  if (direction.mu.rows() != mu_.rows() || direction.mu.cols() != mu_.cols()) {
    throw std::invalid_argument("gradient mu block has wrong shape");
  }
  mu_.noalias() += step * direction.mu;
  if (has_lambda()) {
    if (direction.lambda.rows() != lambda_.rows() ||
        direction.lambda.cols() != lambda_.cols()) {
      throw std::invalid_argument("gradient lambda block has wrong shape");
    }
    lambda_.noalias() += step * direction.lambda;
  }
}

bool GenotypeModel::params_finite() const {
  return mu_.allFinite() && (!has_lambda() || lambda_.allFinite());
}

RuleAssignment materialize(const Genotype& g, const Topology& topo) {
  if (g.h.rows() != topo.synapse_count()) {
    throw std::invalid_argument("genotype row count does not match synapse count");
  }
  if (g.h.cols() != kRuleDim) {
    throw std::invalid_argument("rule matrix must have 5 columns");
  }
  RuleAssignment out;
  out.rules.resize(g.h.rows());
  for (Eigen::Index i = 0; i < g.h.rows(); ++i) {
    out.rules[i] = HebbRule{g.h(i, 0), g.h(i, 1), g.h(i, 2), g.h(i, 3), g.h(i, 4)};
  }
  return out;
}

}  // namespace hebbes
