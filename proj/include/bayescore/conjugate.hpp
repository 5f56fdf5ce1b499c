#pragma once

#include <cstdint>
#include <vector>

#include "bayescore/dist.hpp"
#include "bayescore/errors.hpp"
#include "bayescore/prob_calc.hpp"
#include "bayescore/rational.hpp"

namespace bayescore::conjugate {

using dist::Distribution;

struct SufficientStats {
  std::size_t n = 0;
  double sum_y = 0.0;
  double mean_y = 0.0;
  /// Total sum of squared deviations from the sample mean.
  double tss = 0.0;

  /// Sum of squared deviations from mu0: tss + n (mean_y - mu0)^2.
  double sum_sq_dev_from(double mu0) const;
};

/// Two-pass accumulation. Throws EmptyDataError for empty input.
SufficientStats sufficient_stats(const std::vector<double>& data);

// Hyperparameter algebra, generic in the number type so the same code runs in
// double for fitting and in exact rational arithmetic for verification.

template <class T>
struct ShapeRate {
  T alpha;
  T beta;
};

/// Beta(alpha, beta) prior, y successes in n trials.
template <class T>
ShapeRate<T> beta_binomial_hyper(const ShapeRate<T>& prior, const T& y, const T& n) {
  return {prior.alpha + y, prior.beta + (n - y)};
}

/// Gamma(alpha, beta) prior on a Poisson rate; n counts summing to sum_y.
template <class T>
ShapeRate<T> gamma_poisson_hyper(const ShapeRate<T>& prior, const T& sum_y, const T& n) {
  return {prior.alpha + sum_y, prior.beta + n};
}

/// Gamma(alpha, beta) prior on an exponential rate; n intervals summing to sum_y.
template <class T>
ShapeRate<T> exponential_gamma_hyper(const ShapeRate<T>& prior, const T& sum_y, const T& n) {
  return {prior.alpha + n, prior.beta + sum_y};
}

/// IG(alpha, beta) prior on a Gauss variance with known mean; sum_sq_dev = n v.
template <class T>
ShapeRate<T> gauss_known_mean_hyper(const ShapeRate<T>& prior, const T& sum_sq_dev, const T& n) {
  return {prior.alpha + n / T(2), prior.beta + sum_sq_dev / T(2)};
}

/// Gauss prior on a mean in precision form: precision 1/s^2 and
/// precision-weighted location m/s^2. Updates are then plain additions.
template <class T>
struct GaussNatural {
  T precision;
  T weighted_mean;
};

template <class T>
GaussNatural<T> gauss_known_variance_hyper(const GaussNatural<T>& prior, const T& sigma0_sq, const T& sum_y,
                                           const T& n) {
  return {prior.precision + n / sigma0_sq, prior.weighted_mean + sum_y / sigma0_sq};
}

// Distribution-valued solvers.

Distribution beta_binomial_update(double alpha, double beta, std::int64_t y, std::int64_t n);
Distribution gamma_poisson_update(double alpha, double beta, const SufficientStats& counts);
Distribution gauss_known_variance_update(double m0, double s0, double sigma0, const SufficientStats& stats);
Distribution gauss_known_mean_update(double alpha0, double beta0, double mu0, const std::vector<double>& data);
Distribution exponential_gamma_update(double alpha, double beta, const SufficientStats& stats);

/// Checks that every datum is a non-negative integer (DomainError otherwise).
void require_counts(const std::vector<double>& data);
/// Checks that every datum is >= 0 (DomainError otherwise).
void require_non_negative(const std::vector<double>& data);

/// Posterior predictive success probability (y+1)/(n+2) under the uniform prior.
Rational rule_of_succession_exact(std::int64_t y, std::int64_t n);
double rule_of_succession(std::int64_t y, std::int64_t n);

/// Prior predictive of y in 0..n under Binomial with a uniform prior: 1/(n+1) each.
std::vector<Rational> prior_predictive_binomial_uniform_exact(std::int64_t n);
prob::DiscretePrior prior_predictive_binomial_uniform(std::int64_t n);

/// Posterior variance (a+y)(b+n-y) / ((a+b+n)^2 (a+b+n+1)).
double beta_binomial_posterior_variance(double alpha, double beta, std::int64_t y, std::int64_t n);

/// Gauss-inverse-Gamma joint posterior: mu | sigma^2 ~ N(mu_n, sigma^2 / kappa),
/// sigma^2 ~ IG(alpha_n, beta_n).
struct GaussInverseGammaPosterior {
  double mu_n;
  double kappa;
  double alpha_n;
  double beta_n;
};

struct GaussJointResult {
  Distribution sigma2_marginal;
  Distribution mu_marginal;
  GaussInverseGammaPosterior joint;
};

/// Flat joint prior on (mu, sigma^2). Needs n >= 2 and tss > 0.
GaussJointResult gauss_joint_uniform(const SufficientStats& stats);
/// mu | sigma^2 ~ N(m0, sigma^2), sigma^2 ~ IG(alpha0, beta0).
GaussJointResult gauss_joint_conditional_conjugate(double m0, double alpha0, double beta0,
                                                   const SufficientStats& stats);

/// Predictive distribution of one new datum under a Gauss-inverse-Gamma posterior.
Distribution gauss_joint_predictive(const GaussInverseGammaPosterior& post);

}  // namespace bayescore::conjugate
