#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hebbes/plastic.hpp"

namespace hebbes {

// How rules are distributed over synapses:
//   PerSynapse  - independent normal per synapse, mu is rows x cols.
//   SharedGmm   - mixture of `components` rule means with learned assignment
//                 logits; the component index is marginalized out.
//   JointGmm    - same parameters, but the component draw is part of the
//                 individual, so the density factorizes without the inner sum.
//   SingleRule  - SharedGmm with one component.
//   FixedRandom - component per synapse drawn once at construction and frozen;
//                 only the means are optimized.
enum class ModelKind { PerSynapse, SharedGmm, JointGmm, SingleRule, FixedRandom };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

// Number of mixture components for a sharing ratio rho: max(1, round(N/rho)).
int rho_to_components(int n_synapses, int rho);

// A sampled individual. `h` holds one rule row per synapse; `k` is present
// only when the component draw is part of the individual (JointGmm) or frozen
// in the model (FixedRandom).
struct Genotype {
  Matrix h;
  std::vector<int> k;
};

// Gradient (or Adam moment) with the same block structure as the model
// parameters. `lambda` has zero size when the model has no logits.
struct ParamGrad {
  Matrix mu;
  Matrix lambda;

  void set_zero() {
    mu.setZero();
    lambda.setZero();
  }
  double mu_inf_norm() const {
    return mu.size() == 0 ? 0.0 : mu.cwiseAbs().maxCoeff();
  }
  double lambda_inf_norm() const {
    return lambda.size() == 0 ? 0.0 : lambda.cwiseAbs().maxCoeff();
  }
  bool all_finite() const {
    return mu.allFinite() && lambda.allFinite();
  }
};

// Distribution p(z|theta) over rule matrices, with sampling, log-density and
// closed-form score gradients (no autodiff; verified against finite
// differences by the oracle suite).
class GenotypeModel {
 public:
  static GenotypeModel per_synapse(int rows, int cols, double sigma);
  static GenotypeModel shared_gmm(int rows, int components, int cols, double sigma);
  static GenotypeModel joint_gmm(int rows, int components, int cols, double sigma);
  static GenotypeModel single_rule(int rows, int cols, double sigma);
  static GenotypeModel fixed_random(int rows, int components, int cols,
                                    double sigma, std::uint64_t assignment_seed);
  // Reconstruction from persisted state: the recorded assignment verbatim.
  static GenotypeModel fixed_random_with(int rows, int components, int cols,
                                         double sigma, std::vector<int> assignment);

  ModelKind kind() const { return kind_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int components() const { return components_; }
  double sigma() const { return sigma_; }
  bool has_lambda() const { return lambda_.size() > 0; }

  const Matrix& mu() const { return mu_; }
  Matrix& mu() { return mu_; }
  const Matrix& lambda() const { return lambda_; }
  Matrix& lambda() { return lambda_; }
  const std::vector<int>& fixed_assignment() const { return fixed_k_; }

  // i.i.d. normal means, logits left at zero (uniform mixture).
  void init_mu_gaussian(double stddev, std::uint64_t seed);

  Genotype sample(std::uint64_t seed) const;
  double log_prob(const Genotype& g) const;
  ParamGrad grad_log_prob(const Genotype& g) const;

  // Streaming form used by the gradient estimator: acc += weight * score(g).
  // Never materializes more than one candidate's gradient at a time.
  void accumulate_grad_log_prob(const Genotype& g, double weight,
                                ParamGrad& acc) const;

  // Posterior component probabilities per synapse, computed in log space.
  Matrix responsibilities(const Matrix& h) const;

  ParamGrad zero_grad() const;

  // theta += step * direction, block-wise.
  void apply_step(const ParamGrad& direction, double step);

  bool params_finite() const;

 private:
  GenotypeModel(ModelKind kind, int rows, int components, int cols, double sigma);

  void check_genotype(const Genotype& g) const;
  // log N(h_i | m, sigma^2 I) for one rule row.
  double log_normal_row(int i, const Matrix& h, int component_row,
                        const Matrix& means) const;

  ModelKind kind_;
  int rows_;
  int components_;
  int cols_;
  double sigma_;
  Matrix mu_;
  Matrix lambda_;
  std::vector<int> fixed_k_;
};

// Binds sampled rules to synapses: rule i of the assignment is row i of h.
RuleAssignment materialize(const Genotype& g, const Topology& topo);

}  // namespace hebbes
