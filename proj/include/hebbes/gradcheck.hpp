#pragma once

#include <functional>
#include <optional>
#include <string>

#include "hebbes/genotype.hpp"

namespace hebbes {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string argmax_coordinate;  // e.g. "trial 12 mu(3,2)"
  double step = 1e-5;
  int trials = 0;
  int skipped = 0;  // instances where the function was not finite

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// rel err |a - f| / max(|a|, |f|, 1e-8); the convention all reports use.
double relative_error(double analytic, double numeric);

// Central differences per coordinate: (fn(t + s*e) - fn(t - s*e)) / (2s).
// Coordinates where fn is non-finite come back as NaN rather than throwing.
Vector finite_diff(const std::function<double(const Vector&)>& fn,
                   const Vector& theta, double step);

// Eq-by-the-letter mixture likelihood: densities multiplied in linear space,
// one log at the end, no stabilization. Only valid on small instances; returns
// nullopt when the product underflows to zero.
std::optional<double> brute_force_gmm_log_prob(const Matrix& mu,
                                               const Matrix& lambda,
                                               double sigma, const Matrix& h);

// Randomized finite-difference check of the analytic score gradients for one
// model kind. Instances are small (rows <= 8, components <= 3) with h within
// 3 sigma of the sampled component means.
GradCheckReport check_model_gradients(ModelKind kind, int trials,
                                      std::uint64_t seed, double step = 1e-5);

}  // namespace hebbes
