#include "bayescore/conjugate.hpp"

#include <cmath>
#include <string>

namespace bayescore::conjugate {

using namespace dist;

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(what) + " must be finite and > 0");
}

void require_trials(std::int64_t y, std::int64_t n) {
  if (n < 0 || y < 0) throw DomainError("counts must be non-negative");
  if (y > n) throw DomainError("successes y=" + std::to_string(y) + " exceed trials n=" + std::to_string(n));
}

Distribution t_marginal(const GaussInverseGammaPosterior& p) {
  return NoncentralT{p.mu_n, std::sqrt(p.beta_n / p.alpha_n / p.kappa), 2.0 * p.alpha_n};
}

}  // namespace

double SufficientStats::sum_sq_dev_from(double mu0) const {
  const double d = mean_y - mu0;
  return tss + static_cast<double>(n) * d * d;
}

SufficientStats sufficient_stats(const std::vector<double>& data) {
  if (data.empty()) throw EmptyDataError("sufficient statistics need at least one datum");
  SufficientStats s;
  s.n = data.size();
  s.sum_y = prob::stable_sum(data);
  s.mean_y = s.sum_y / static_cast<double>(s.n);
  double tss = 0.0;
  double comp = 0.0;
  for (double y : data) {
    if (!std::isfinite(y)) throw DomainError("non-finite datum");
    const double e = y - s.mean_y;
    tss += e * e;
    comp += e;
  }
  // Second-pass correction removes the rounding left in mean_y.
  s.tss = std::max(0.0, tss - comp * comp / static_cast<double>(s.n));
  return s;
}

void require_counts(const std::vector<double>& data) {
  for (double y : data) {
    if (!(y >= 0.0) || std::floor(y) != y) throw DomainError("counts must be non-negative integers");
  }
}

void require_non_negative(const std::vector<double>& data) {
  for (double y : data) {
    if (!(y >= 0.0)) throw DomainError("data must be non-negative");
  }
}

Distribution beta_binomial_update(double alpha, double beta, std::int64_t y, std::int64_t n) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  require_trials(y, n);
  const auto h = beta_binomial_hyper<double>({alpha, beta}, static_cast<double>(y), static_cast<double>(n));
  return Beta{h.alpha, h.beta};
}

Distribution gamma_poisson_update(double alpha, double beta, const SufficientStats& counts) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  if (counts.sum_y < 0.0) throw DomainError("counts must be non-negative");
  const auto h = gamma_poisson_hyper<double>({alpha, beta}, counts.sum_y, static_cast<double>(counts.n));
  return Gamma{h.alpha, h.beta};
}

Distribution gauss_known_variance_update(double m0, double s0, double sigma0, const SufficientStats& stats) {
  require_positive(s0, "s0");
  require_positive(sigma0, "sigma0");
  if (stats.n == 0) throw EmptyDataError("at least one datum is required");
  const double prior_precision = 1.0 / (s0 * s0);
  const auto h = gauss_known_variance_hyper<double>({prior_precision, m0 * prior_precision}, sigma0 * sigma0,
                                                    stats.sum_y, static_cast<double>(stats.n));
  return Gauss{h.weighted_mean / h.precision, std::sqrt(1.0 / h.precision)};
}

Distribution gauss_known_mean_update(double alpha0, double beta0, double mu0, const std::vector<double>& data) {
  require_positive(alpha0, "alpha0");
  require_positive(beta0, "beta0");
  const SufficientStats s = sufficient_stats(data);
  const auto h = gauss_known_mean_hyper<double>({alpha0, beta0}, s.sum_sq_dev_from(mu0), static_cast<double>(s.n));
  return InverseGamma{h.alpha, h.beta};
}

Distribution exponential_gamma_update(double alpha, double beta, const SufficientStats& stats) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  if (stats.sum_y < 0.0) throw DomainError("exponential data must be non-negative");
  const auto h = exponential_gamma_hyper<double>({alpha, beta}, stats.sum_y, static_cast<double>(stats.n));
  return Gamma{h.alpha, h.beta};
}

Rational rule_of_succession_exact(std::int64_t y, std::int64_t n) {
  require_trials(y, n);
  return Rational(y + 1, n + 2);
}

double rule_of_succession(std::int64_t y, std::int64_t n) { return rule_of_succession_exact(y, n).to_double(); }

std::vector<Rational> prior_predictive_binomial_uniform_exact(std::int64_t n) {
  if (n < 0) throw DomainError("n must be non-negative");
  return std::vector<Rational>(static_cast<std::size_t>(n + 1), Rational(1, n + 1));
}

prob::DiscretePrior prior_predictive_binomial_uniform(std::int64_t n) {
  if (n < 0) throw DomainError("n must be non-negative");
  return prob::DiscretePrior::uniform(static_cast<std::size_t>(n + 1));
}

double beta_binomial_posterior_variance(double alpha, double beta, std::int64_t y, std::int64_t n) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  require_trials(y, n);
  const double a = alpha + static_cast<double>(y);
  const double b = beta + static_cast<double>(n - y);
  const double s = alpha + beta + static_cast<double>(n);
  return a * b / (s * s * (s + 1.0));
}

GaussJointResult gauss_joint_uniform(const SufficientStats& stats) {
  if (stats.n < 2) throw ImproperPosteriorError("the flat joint prior needs n >= 2");
  if (!(stats.tss > 0.0)) throw ImproperPosteriorError("the flat joint prior needs non-constant data");
  const double n = static_cast<double>(stats.n);
  const GaussInverseGammaPosterior joint{stats.mean_y, n, 0.5 * (n - 1.0), 0.5 * stats.tss};
  return {InverseGamma{joint.alpha_n, joint.beta_n}, t_marginal(joint), joint};
}

GaussJointResult gauss_joint_conditional_conjugate(double m0, double alpha0, double beta0,
                                                   const SufficientStats& stats) {
  require_positive(alpha0, "alpha0");
  require_positive(beta0, "beta0");
  if (stats.n == 0) throw EmptyDataError("at least one datum is required");
  const double n = static_cast<double>(stats.n);
  const double d = m0 - stats.mean_y;
  GaussInverseGammaPosterior joint{};
  joint.mu_n = m0 / (n + 1.0) + n * stats.mean_y / (n + 1.0);
  joint.kappa = n + 1.0;
  joint.alpha_n = alpha0 + 0.5 * n;
  joint.beta_n = beta0 + 0.5 * stats.tss + 0.5 * (n / (n + 1.0)) * d * d;
  return {InverseGamma{joint.alpha_n, joint.beta_n}, t_marginal(joint), joint};
}

Distribution gauss_joint_predictive(const GaussInverseGammaPosterior& post) {
  const double scale = std::sqrt(post.beta_n / post.alpha_n * (1.0 + 1.0 / post.kappa));
  return NoncentralT{post.mu_n, scale, 2.0 * post.alpha_n};
}

}  // namespace bayescore::conjugate
