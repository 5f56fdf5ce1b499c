#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bayescore/dist.hpp"
#include "bayescore/prob_calc.hpp"
#include "bayescore/sampler.hpp"

namespace bayescore::evidence {

using Vector = Eigen::VectorXd;

/// S = -sum p_i ln(p_i / m_i); empty measure means m_i = 1. Zero p_i contribute 0.
double shannon_entropy(const prob::DiscretePrior& p, const std::vector<double>& measure = {});

struct MomentConstraint {
  /// C(x_i) for every support point.
  std::vector<double> values;
  double target;
};

struct MaxEntProblem {
  std::vector<double> support;
  /// Positive per-point weights; empty means uniform.
  std::vector<double> measure;
  std::vector<MomentConstraint> constraints;
};

struct MaxEntSolution {
  prob::DiscretePrior p;
  /// Multipliers of p_i = m_i exp(-(1 + lambda0) - sum_k lambda_k C_k(x_i)).
  Vector lambda;
  double lambda0 = 0.0;
  std::size_t iterations = 0;
  double max_residual = 0.0;
};

/// Damped Newton on the convex dual from lambda = 0. Throws InfeasibleError
/// when a target lies outside the range the support can reach or the dual
/// diverges, ToleranceError when max_iter passes without |residual| < tol.
MaxEntSolution maxent_solve(const MaxEntProblem& problem, double tol = 1e-10, std::size_t max_iter = 200);

/// sum p_i ln(p_i / q_i). Throws SupportError when q_i = 0 < p_i,
/// DimensionError on differing sizes.
double kl_divergence(const prob::DiscretePrior& p, const prob::DiscretePrior& q);

/// -2 sum log_liks.
double deviance(const std::vector<double>& log_liks);

struct ModelEvidence {
  enum class Method { ClosedForm, Quadrature };
  double log_average_likelihood;
  Method method = Method::ClosedForm;
};

/// exp(log evidence i - log evidence j).
double bayes_factor(const ModelEvidence& i, const ModelEvidence& j);

/// Evidence of a particular sequence with y successes in n Bernoulli trials under Beta(a, b).
ModelEvidence beta_binomial_evidence(double a, double b, std::int64_t y, std::int64_t n);
double bayes_factor_beta_binomial(double a1, double b1, double a2, double b2, std::int64_t y, std::int64_t n);

enum class JeffreysBand { Supported, WeakAgainst, SubstantialAgainst, StrongAgainst, VeryStrongAgainst, DecisiveAgainst };

/// Bands split at 1, 10^-1/2, 10^-1, 10^-3/2 and 10^-2; a value on a split
/// goes to the band with stronger evidence against. Throws DomainError unless B12 > 0.
JeffreysBand jeffreys_classify(double b12);
std::string to_string(JeffreysBand band);

using LogLikelihood = std::function<double(const Vector& theta)>;

/// log integral of exp(log_lik) against the prior. A univariate prior gives
/// a 1-D integral, a bivariate one a 2-D integral; the integration box holds
/// all but 1e-10 of the prior mass. `grid` points per axis locate the
/// likelihood peak before adaptive quadrature. Throws DimensionError above 2 dimensions.
ModelEvidence evidence_quadrature(const LogLikelihood& log_lik, const dist::Distribution& prior,
                                  std::size_t grid = 2001);
/// Independent univariate priors, one per coordinate.
ModelEvidence evidence_quadrature(const LogLikelihood& log_lik, const std::vector<dist::Distribution>& priors,
                                  std::size_t grid = 2001);

struct DicResult {
  double dic;
  double p_dic;
  double mean_deviance;
  double deviance_at_mean;
};

/// mean_deviance = mean of -2 total_log_lik over pooled draws; p_dic =
/// mean_deviance - D(theta_bar) with theta_bar the mean of the sampled coordinates.
DicResult dic(const mcmc::ChainSet& chains, const LogLikelihood& total_log_lik);

struct WaicResult {
  double waic;
  double lppd;
  double p_waic;
  /// sqrt(n) times the sd of the pointwise waic terms.
  double se;
  Vector pointwise;
};

/// pointwise: draws x observations of log single-datum likelihoods.
WaicResult waic(const Eigen::MatrixXd& pointwise);

/// Evaluates `per_obs` at every pooled draw, giving the WAIC input matrix.
Eigen::MatrixXd pointwise_matrix(const mcmc::ChainSet& chains, const std::function<Vector(const Vector&)>& per_obs);

struct ModelScore {
  std::string name;
  double waic;
  double p_waic;
  double lppd;
  double waic_se;
  double dic;
  double p_dic;
};

struct ComparisonRow {
  ModelScore score;
  double delta_waic;
  double weight;
};

/// Ascending by WAIC (input order on ties); weights exp(-delta/2) normalised.
std::vector<ComparisonRow> compare_models(const std::vector<ModelScore>& models);
std::string comparison_to_json(const std::vector<ComparisonRow>& rows);

}  // namespace bayescore::evidence
