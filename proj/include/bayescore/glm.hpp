#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bayescore/dist.hpp"
#include "bayescore/errors.hpp"
#include "bayescore/rng.hpp"
#include "bayescore/sampler.hpp"

namespace bayescore::glm {

using Vector = Eigen::VectorXd;

/// n x (k+1) design; column 0 is the constant 1.
struct DesignMatrix {
  Eigen::MatrixXd x;
  /// k+1 names, the first naming the ones column.
  std::vector<std::string> names;

  /// Prepends the ones column to raw predictor columns.
  static DesignMatrix from_predictors(const Eigen::MatrixXd& predictors, std::vector<std::string> names);
  /// Ones column only.
  static DesignMatrix intercept_only(std::size_t n);

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t columns() const { return static_cast<std::size_t>(x.cols()); }
  /// Throws DimensionError on shape problems, DomainError on non-finite
  /// entries, ZeroVarianceError naming a constant column other than column 0.
  void validate() const;
};

enum class Link { Identity, Logistic, NaturalExp, NegativeInverse };

/// Throws DomainError for NegativeInverse with z >= 0.
double apply_inverse_link(Link link, double z);
std::string link_name(Link link);
/// Throws SpecError for an unknown name.
Link parse_link(const std::string& name);

/// Which transform of a positive parameter a prior is stated on.
enum class PriorOn { Value, Variance, Precision };

/// Prior on a positive quantity (scale, degrees of freedom, size). For a
/// dispersion, Value means the prior is on the standard deviation. Gauss and
/// Cauchy families are read as half-distributions and need location 0.
struct PositivePrior {
  dist::Distribution d;
  PriorOn on = PriorOn::Value;
};

struct Fixed {
  dist::Distribution d;
};
/// Group-level N(centre, omega^2) with hyperpriors on centre and omega.
struct Adaptive {
  enum class Centring { Auto, Zeta, SeparateConstant };
  dist::Distribution location = dist::Gauss{0.0, 1.0};
  PositivePrior scale{dist::InverseGamma{1.0, 1.0}, PriorOn::Variance};
  /// Zeta: intercepts ~ N(zeta, omega^2). SeparateConstant: eta gets a
  /// constant with the location prior and intercepts ~ N(0, omega^2). Auto
  /// picks SeparateConstant for Poisson and NegativeBinomial, Zeta otherwise.
  Centring centring = Centring::Auto;
};
/// N(mu0, sigma0^2) truncated to (-inf, upper_bound].
struct TruncatedGauss {
  double mu0;
  double sigma0;
  double upper_bound;
};
using PriorSpec = std::variant<Fixed, Adaptive, TruncatedGauss>;

struct GaussLik {
  bool homoscedastic = true;
};
struct StudentTLik {
  /// Prior on nu - 2.
  PositivePrior nu_prior{dist::Exponential{1.0 / 29.0}, PriorOn::Value};
};
struct BernoulliLik {};
struct BinomialLik {
  /// Per-row trial counts; empty means 1 for every row.
  std::vector<std::int64_t> trials;
};
struct PoissonLik {
  /// Per-row exposure; empty means 1. Enters eta as -ln(exposure).
  std::vector<double> exposure;
};
struct ExponentialLik {};
/// Cell-means ANOVA. Homoscedastic: Gauss with fixed cell priors.
/// Heteroscedastic: t likelihood with mu0 + mu_g, adaptive tau and
/// group variances sigma_g^2 ~ IG(alpha, beta).
struct AnovaCellMeansLik {
  bool heteroscedastic = false;
  PositivePrior nu_prior{dist::Exponential{1.0 / 29.0}, PriorOn::Value};
  /// Prior on alpha and beta of the group-variance distribution.
  dist::Distribution shape_rate_prior = dist::Gamma{1.0, 1.0};
};
struct NegativeBinomialLik {
  PositivePrior size_prior{dist::Gamma{2.0, 0.1}, PriorOn::Value};
};
using Likelihood = std::variant<GaussLik, StudentTLik, BernoulliLik, BinomialLik, PoissonLik, ExponentialLik,
                                AnovaCellMeansLik, NegativeBinomialLik>;

std::string likelihood_name(const Likelihood& lik);

struct ModelSpec {
  Likelihood likelihood = GaussLik{};
  Link link = Link::Identity;
  /// Intercept (or separate-constant) prior; nullopt means the family default.
  std::optional<PriorSpec> intercept_prior;
  /// One per slope, or a single entry broadcast to all slopes; empty means default.
  std::vector<PriorSpec> slope_priors;
  /// Group-intercept prior (Fixed or Adaptive); nullopt means Adaptive{} when groups are given.
  std::optional<PriorSpec> group_prior;
  /// Nullopt means IG(0.01, 0.01) on the variance.
  std::optional<PositivePrior> dispersion_prior;
  bool standardize = true;

  /// Throws SpecError on a disallowed likelihood/link pairing or prior misuse.
  void validate() const;
};

/// Row groups, 1-based indices.
struct Groups {
  std::vector<int> index;
  int n_groups = 0;
  std::vector<std::string> labels;

  /// Labels assigned in order of first appearance.
  static Groups from_labels(const std::vector<std::string>& row_labels);
  void validate(std::size_t n_rows) const;
};

struct Standardization {
  /// Per design column; the ones column and passed-through columns have mean 0, sd 1.
  std::vector<double> x_mean;
  std::vector<double> x_sd;
  std::vector<bool> x_standardized;
  bool y_standardized = false;
  double y_mean = 0.0;
  double y_sd = 1.0;

  static Standardization identity(std::size_t columns);
  std::size_t columns() const { return x_mean.size(); }
};

struct Standardized {
  Vector zy;
  DesignMatrix zx;
  Standardization meta;
};

/// Column z-scores with the (n-1) sd. The ones column and 0/1 indicator
/// columns pass through. Throws ZeroVarianceError naming the column.
Standardized standardize(const Vector& y, const DesignMatrix& x, bool standardize_y = true);
/// Applies an existing transform to new design rows.
DesignMatrix apply_standardization(const Standardization& meta, const DesignMatrix& x);
/// Standardised coefficients (intercept first) to the raw scale.
/// Throws MetaMismatchError when the size disagrees with meta.
Vector destandardize(const Standardization& meta, const Vector& z_coefficients);
double destandardize_scale(const Standardization& meta, double z_scale);

struct AnovaRecentred {
  double a0;
  Vector a;
};
/// a0 = mean(mu0 + mu_g), a_g = mu0 + mu_g - a0.
AnovaRecentred anova_recenter(double mu0, const Vector& mu_g);

/// New cases for prediction.
struct NewCases {
  /// Raw (unstandardised) design with the ones column.
  DesignMatrix x;
  /// 1-based group per row; 0 draws a fresh group intercept. Empty when ungrouped.
  std::vector<int> group;
  std::vector<std::int64_t> trials;
  std::vector<double> exposure;

  std::size_t rows() const { return x.rows(); }
};

namespace detail {
class Model;
}

/// A model bound to data. Immutable; all members are safe to call concurrently.
class CompiledModel {
 public:
  /// Sampled, unconstrained parameterisation with analytic gradient.
  const mcmc::LogTarget& target() const;
  const Standardization& meta() const;
  const std::vector<std::string>& param_names() const;
  std::size_t n_obs() const;
  bool has_full_conditionals() const;

  double log_prior(const Vector& theta) const;
  /// Sum of pointwise_log_lik.
  double log_likelihood(const Vector& theta) const;
  /// Log single-datum likelihoods on the raw response scale.
  Vector pointwise_log_lik(const Vector& theta) const;

  /// Natural-scale quantities: destandardised coefficients, scales, nu, size.
  const std::vector<std::string>& derived_names() const;
  Vector derived(const Vector& theta) const;

  /// One draw of the response for row `row` of `cases` given theta.
  double draw_response(const Vector& theta, const NewCases& cases, std::size_t row, Rng& rng) const;
  /// Throws DimensionError when cases do not fit the model.
  void check_cases(const NewCases& cases) const;

 private:
  friend CompiledModel compile(const ModelSpec&, const Vector&, const DesignMatrix&, const std::optional<Groups>&);
  std::shared_ptr<const detail::Model> impl_;
  mcmc::LogTarget target_;
};

/// Binds spec and data. Throws SpecError, DimensionError, DomainError
/// (response outside the likelihood's support) or ZeroVarianceError.
CompiledModel compile(const ModelSpec& spec, const Vector& y, const DesignMatrix& x,
                      const std::optional<Groups>& groups = std::nullopt);

/// Declarative model document (see docs/model-spec.md).
struct ModelDocument {
  ModelSpec spec;
  std::string response;
  std::vector<std::string> predictors;
  std::optional<std::string> group;
  /// Column with per-row binomial trials, or fixed count.
  std::optional<std::string> trials_column;
  std::optional<std::int64_t> trials_constant;
  std::optional<std::string> exposure_column;
  mcmc::SamplerConfig sampler;
  /// Sampler fields present in the document. Command-line flags beat them; they beat defaults.
  std::vector<std::string> sampler_fields;
};

/// Throws SpecError naming the offending field.
ModelDocument parse_model_document(const std::string& json_text);

}  // namespace bayescore::glm
