#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bayescore/errors.hpp"
#include "bayescore/rng.hpp"

namespace bayescore::dist {

// Parameter blocks. Field names follow the conventional symbols of each
// family; validation happens when a block is wrapped in a Distribution.

struct Bernoulli { double theta; };
struct Binomial { std::int64_t n; double theta; };
struct Poisson { double theta; };
struct Gauss { double mu; double sigma; };
/// Location-scale t with nu degrees of freedom.
struct NoncentralT { double mu; double sigma; double nu; };
/// Rate parametrisation: density theta * exp(-theta * y).
struct Exponential { double theta; };
/// Density (theta / y_min) * (y_min / y)^(theta + 1) on y >= y_min.
struct Pareto { double theta; double y_min; };
struct Beta { double alpha; double beta; };
/// Shape/rate.
struct Gamma { double alpha; double beta; };
/// Shape/scale: density beta^alpha / Gamma(alpha) x^-(alpha+1) exp(-beta / x).
struct InverseGamma { double alpha; double beta; };
struct Cauchy { double x0; double gamma; };
struct Laplace { double mu; double b; };
/// Uniform over the integers 1..k.
struct DiscreteUniform { std::int64_t k; };
struct ContinuousUniform { double a; double b; };
/// Density 1 / (ln(b/a) * x) on [a, b].
struct TruncatedJeffreys { double a; double b; };
/// Number of failures y before the n-th success, success probability theta
/// (the dnbinom(y, n, theta) convention). n may be any positive real.
struct NegativeBinomial { double n; double theta; };
struct MultivariateGauss { Eigen::VectorXd mu; Eigen::MatrixXd cov; };
struct MultivariateT { Eigen::VectorXd mu; Eigen::MatrixXd scale; double nu; };

using Family =
    std::variant<Bernoulli, Binomial, Poisson, Gauss, NoncentralT, Exponential, Pareto, Beta,
                 Gamma, InverseGamma, Cauchy, Laplace, DiscreteUniform, ContinuousUniform,
                 TruncatedJeffreys, NegativeBinomial, MultivariateGauss, MultivariateT>;

/// An immutable, validated member of one of the supported families.
class Distribution {
 public:
  template <class F>
    requires std::is_constructible_v<Family, F>
  Distribution(F params) : family_(std::move(params)) {  // NOLINT(implicit)
    validate();
  }

  const Family& family() const { return family_; }

  template <class F>
  bool is() const {
    return std::holds_alternative<F>(family_);
  }

  template <class F>
  const F& as() const {
    if (const F* p = std::get_if<F>(&family_)) return *p;
    throw ParameterError("distribution is a " + std::string(name()) + ", not the requested family");
  }

  std::string_view name() const;
  bool is_discrete() const;
  bool is_multivariate() const;
  /// 1 for univariate families.
  std::size_t dimension() const;

 private:
  void validate() const;

  Family family_;
};

struct Moments {
  std::optional<double> mean;
  std::optional<double> variance;
};

struct MvMoments {
  std::optional<Eigen::VectorXd> mean;
  std::optional<Eigen::MatrixXd> covariance;
};

/// Closed interval containing the support (infinite ends allowed).
struct Support {
  double lo;
  double hi;
};

/// Log pmf/pdf of a univariate family. Discrete families require an
/// integer-valued x. Throws DomainError outside the support.
double log_density(const Distribution& d, double x);
/// Log pdf of a multivariate family (or a univariate one with a length-1 x).
double log_density(const Distribution& d, const Eigen::VectorXd& x);

/// Log density that returns -inf instead of throwing outside the support.
double log_density_or_neg_inf(const Distribution& d, double x);

double cdf(const Distribution& d, double x);

Moments moments(const Distribution& d);
MvMoments mv_moments(const Distribution& d);

/// Continuous families: x with cdf(x) = p. Discrete: smallest x with cdf(x) >= p.
double quantile(const Distribution& d, double p);

Support support(const Distribution& d);

/// One draw from a univariate family.
double draw(const Distribution& d, Rng& rng);
std::vector<double> sample(const Distribution& d, Rng& rng, std::size_t count);
/// Multivariate draws, one per row.
Eigen::MatrixXd sample_mv(const Distribution& d, Rng& rng, std::size_t count);

// Special functions shared with the other modules.
double log_gamma_fn(double x);
double log_beta_fn(double a, double b);
double log_choose(double n, double k);
double log_factorial(double k);
/// Regularised lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);
/// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
double std_normal_cdf(double z);
double log_sum_exp(const std::vector<double>& v);

}  // namespace bayescore::dist
