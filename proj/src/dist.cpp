#include "bayescore/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace bayescore::dist {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

void require_integer(double x, std::string_view family) {
  if (!is_integer(x)) {
    throw DomainError(std::string(family) + ": value " + std::to_string(x) + " is not an integer");
  }
}

[[noreturn]] void outside(std::string_view family, double x) {
  throw DomainError(std::string(family) + ": value " + std::to_string(x) + " outside the support");
}

// Lower Cholesky factor of a validated symmetric positive-definite matrix.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw ParameterError("matrix is not positive definite");
  return llt.matrixL();
}

double mahalanobis_sq(const Eigen::MatrixXd& l, const Eigen::VectorXd& diff) {
  const Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(diff);
  return z.squaredNorm();
}

double log_det_from_cholesky(const Eigen::MatrixXd& l) {
  return 2.0 * l.diagonal().array().log().sum();
}

void validate_matrix(const Eigen::VectorXd& mu, const Eigen::MatrixXd& m, std::string_view what) {
  const auto dim = mu.size();
  require(dim >= 1, std::string(what) + ": empty mean vector");
  require(m.rows() == dim && m.cols() == dim, std::string(what) + ": matrix dimension mismatch");
  require(mu.allFinite() && m.allFinite(), std::string(what) + ": non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          std::string(what) + ": matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  require(llt.info() == Eigen::Success, std::string(what) + ": matrix is not positive definite");
}

double gamma_draw(double shape, Rng& rng) {
  // Marsaglia & Tsang, with the u^(1/shape) boost for shape < 1.
  if (shape < 1.0) {
    const double g = gamma_draw(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double t_cdf(double t, double nu) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = nu / (nu + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

// Safeguarded Newton on the CDF inside a bracket.
double invert_continuous(const Distribution& d, double p, double guess, double scale) {
  const Support s = support(d);
  double lo = s.lo;
  double hi = s.hi;
  if (!std::isfinite(lo)) {
    double step = scale;
    lo = guess - step;
    while (cdf(d, lo) > p) {
      step *= 2.0;
      lo = guess - step;
      if (step > 1e300) break;
    }
  }
  if (!std::isfinite(hi)) {
    double step = scale;
    hi = std::max(guess, lo) + step;
    while (cdf(d, hi) < p) {
      step *= 2.0;
      hi = std::max(guess, lo) + step;
      if (step > 1e300) break;
    }
  }
  double x = std::clamp(guess, lo, hi);
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double f = cdf(d, x) - p;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double dens = std::exp(log_density_or_neg_inf(d, x));
    double next = (dens > 0.0 && std::isfinite(dens)) ? x - f / dens : kNaN;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)) ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      return next;
    }
    x = next;
  }
  return x;
}

double invert_discrete(const Distribution& d, double p, double lo, double hi_limit) {
  // Exponential search for an upper bracket, then integer bisection.
  double hi = std::max(lo, 1.0);
  while (hi < hi_limit && cdf(d, hi) < p) hi = std::min(hi_limit, 2.0 * hi + 1.0);
  if (cdf(d, lo) >= p) return lo;
  while (hi - lo > 1.0) {
    const double mid = std::floor(0.5 * (lo + hi));
    if (cdf(d, mid) >= p) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

// ---------------------------------------------------------------------------
// special functions

double log_gamma_fn(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_beta_fn(double a, double b) { return log_gamma_fn(a) + log_gamma_fn(b) - log_gamma_fn(a + b); }

double log_factorial(double k) { return log_gamma_fn(k + 1.0); }

double log_choose(double n, double k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(a, x);
}

double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(a, x);
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Distribution

std::string_view Distribution::name() const {
  return std::visit(
      Overloaded{
          [](const Bernoulli&) { return "Bernoulli"; },
          [](const Binomial&) { return "Binomial"; },
          [](const Poisson&) { return "Poisson"; },
          [](const Gauss&) { return "Gauss"; },
          [](const NoncentralT&) { return "NoncentralT"; },
          [](const Exponential&) { return "Exponential"; },
          [](const Pareto&) { return "Pareto"; },
          [](const Beta&) { return "Beta"; },
          [](const Gamma&) { return "Gamma"; },
          [](const InverseGamma&) { return "InverseGamma"; },
          [](const Cauchy&) { return "Cauchy"; },
          [](const Laplace&) { return "Laplace"; },
          [](const DiscreteUniform&) { return "DiscreteUniform"; },
          [](const ContinuousUniform&) { return "ContinuousUniform"; },
          [](const TruncatedJeffreys&) { return "TruncatedJeffreys"; },
          [](const NegativeBinomial&) { return "NegativeBinomial"; },
          [](const MultivariateGauss&) { return "MultivariateGauss"; },
          [](const MultivariateT&) { return "MultivariateT"; },
      },
      family_);
}

bool Distribution::is_discrete() const {
  return is<Bernoulli>() || is<Binomial>() || is<Poisson>() || is<DiscreteUniform>() ||
         is<NegativeBinomial>();
}

bool Distribution::is_multivariate() const { return is<MultivariateGauss>() || is<MultivariateT>(); }

std::size_t Distribution::dimension() const {
  if (const auto* g = std::get_if<MultivariateGauss>(&family_)) return static_cast<std::size_t>(g->mu.size());
  if (const auto* t = std::get_if<MultivariateT>(&family_)) return static_cast<std::size_t>(t->mu.size());
  return 1;
}

void Distribution::validate() const {
  const std::string n(name());
  auto finite = [&](double v, const char* field) {
    require(std::isfinite(v), n + ": " + field + " must be finite");
  };
  std::visit(
      Overloaded{
          [&](const Bernoulli& d) { require(d.theta >= 0.0 && d.theta <= 1.0, n + ": theta must lie in [0,1]"); },
          [&](const Binomial& d) {
            require(d.n >= 0, n + ": n must be non-negative");
            require(d.theta >= 0.0 && d.theta <= 1.0, n + ": theta must lie in [0,1]");
          },
          [&](const Poisson& d) { finite(d.theta, "theta"); require(d.theta > 0.0, n + ": theta must be > 0"); },
          [&](const Gauss& d) {
            finite(d.mu, "mu");
            finite(d.sigma, "sigma");
            require(d.sigma > 0.0, n + ": sigma must be > 0");
          },
          [&](const NoncentralT& d) {
            finite(d.mu, "mu");
            finite(d.sigma, "sigma");
            require(d.sigma > 0.0, n + ": sigma must be > 0");
            require(d.nu >= 1.0 && !std::isnan(d.nu), n + ": nu must be >= 1");
          },
          [&](const Exponential& d) { finite(d.theta, "theta"); require(d.theta > 0.0, n + ": theta must be > 0"); },
          [&](const Pareto& d) {
            finite(d.theta, "theta");
            finite(d.y_min, "y_min");
            require(d.theta > 0.0, n + ": theta must be > 0");
            require(d.y_min > 0.0, n + ": y_min must be > 0");
          },
          [&](const Beta& d) {
            finite(d.alpha, "alpha");
            finite(d.beta, "beta");
            require(d.alpha > 0.0 && d.beta > 0.0, n + ": alpha and beta must be > 0");
          },
          [&](const Gamma& d) {
            finite(d.alpha, "alpha");
            finite(d.beta, "beta");
            require(d.alpha > 0.0 && d.beta > 0.0, n + ": alpha and beta must be > 0");
          },
          [&](const InverseGamma& d) {
            finite(d.alpha, "alpha");
            finite(d.beta, "beta");
            require(d.alpha > 0.0 && d.beta > 0.0, n + ": alpha and beta must be > 0");
          },
          [&](const Cauchy& d) {
            finite(d.x0, "x0");
            finite(d.gamma, "gamma");
            require(d.gamma > 0.0, n + ": gamma must be > 0");
          },
          [&](const Laplace& d) {
            finite(d.mu, "mu");
            finite(d.b, "b");
            require(d.b > 0.0, n + ": b must be > 0");
          },
          [&](const DiscreteUniform& d) { require(d.k >= 1, n + ": k must be >= 1"); },
          [&](const ContinuousUniform& d) {
            finite(d.a, "a");
            finite(d.b, "b");
            require(d.a < d.b, n + ": a must be < b");
          },
          [&](const TruncatedJeffreys& d) {
            finite(d.a, "a");
            finite(d.b, "b");
            require(d.a > 0.0 && d.a < d.b, n + ": need 0 < a < b");
          },
          [&](const NegativeBinomial& d) {
            finite(d.n, "n");
            require(d.n > 0.0, n + ": n must be > 0");
            require(d.theta > 0.0 && d.theta <= 1.0, n + ": theta must lie in (0,1]");
          },
          [&](const MultivariateGauss& d) { validate_matrix(d.mu, d.cov, n); },
          [&](const MultivariateT& d) {
            validate_matrix(d.mu, d.scale, n);
            require(d.nu > 0.0 && std::isfinite(d.nu), n + ": nu must be > 0");
          },
      },
      family_);
}

// ---------------------------------------------------------------------------
// densities

double log_density(const Distribution& d, double x) {
  if (std::isnan(x)) throw DomainError(std::string(d.name()) + ": NaN argument");
  return std::visit(
      Overloaded{
          [&](const Bernoulli& p) -> double {
            require_integer(x, "Bernoulli");
            if (x == 1.0) return std::log(p.theta);
            if (x == 0.0) return std::log1p(-p.theta);
            outside("Bernoulli", x);
          },
          [&](const Binomial& p) -> double {
            require_integer(x, "Binomial");
            if (x < 0 || x > static_cast<double>(p.n)) outside("Binomial", x);
            const double n = static_cast<double>(p.n);
            const double a = x == 0.0 ? 0.0 : x * std::log(p.theta);
            const double b = x == n ? 0.0 : (n - x) * std::log1p(-p.theta);
            return log_choose(n, x) + a + b;
          },
          [&](const Poisson& p) -> double {
            require_integer(x, "Poisson");
            if (x < 0) outside("Poisson", x);
            return x * std::log(p.theta) - p.theta - log_factorial(x);
          },
          [&](const Gauss& p) -> double {
            const double z = (x - p.mu) / p.sigma;
            return -kLogSqrt2Pi - std::log(p.sigma) - 0.5 * z * z;
          },
          [&](const NoncentralT& p) -> double {
            const double z = (x - p.mu) / p.sigma;
            return log_gamma_fn(0.5 * (p.nu + 1.0)) - log_gamma_fn(0.5 * p.nu) -
                   0.5 * std::log(std::numbers::pi * p.nu) - std::log(p.sigma) -
                   0.5 * (p.nu + 1.0) * std::log1p(z * z / p.nu);
          },
          [&](const Exponential& p) -> double {
            if (x < 0) outside("Exponential", x);
            return std::log(p.theta) - p.theta * x;
          },
          [&](const Pareto& p) -> double {
            if (x < p.y_min) outside("Pareto", x);
            return std::log(p.theta) - std::log(p.y_min) + (p.theta + 1.0) * std::log(p.y_min / x);
          },
          [&](const Beta& p) -> double {
            if (x < 0.0 || x > 1.0) outside("Beta", x);
            const double a = p.alpha == 1.0 ? 0.0 : (p.alpha - 1.0) * std::log(x);
            const double b = p.beta == 1.0 ? 0.0 : (p.beta - 1.0) * std::log1p(-x);
            return a + b - log_beta_fn(p.alpha, p.beta);
          },
          [&](const Gamma& p) -> double {
            if (x < 0.0) outside("Gamma", x);
            const double a = p.alpha == 1.0 ? 0.0 : (p.alpha - 1.0) * std::log(x);
            return p.alpha * std::log(p.beta) - log_gamma_fn(p.alpha) + a - p.beta * x;
          },
          [&](const InverseGamma& p) -> double {
            if (x <= 0.0) {
              if (x == 0.0) return -kInf;
              outside("InverseGamma", x);
            }
            return p.alpha * std::log(p.beta) - log_gamma_fn(p.alpha) - (p.alpha + 1.0) * std::log(x) -
                   p.beta / x;
          },
          [&](const Cauchy& p) -> double {
            const double z = (x - p.x0) / p.gamma;
            return -std::log(std::numbers::pi * p.gamma) - std::log1p(z * z);
          },
          [&](const Laplace& p) -> double { return -std::log(2.0 * p.b) - std::abs(x - p.mu) / p.b; },
          [&](const DiscreteUniform& p) -> double {
            require_integer(x, "DiscreteUniform");
            if (x < 1 || x > static_cast<double>(p.k)) outside("DiscreteUniform", x);
            return -std::log(static_cast<double>(p.k));
          },
          [&](const ContinuousUniform& p) -> double {
            if (x < p.a || x > p.b) outside("ContinuousUniform", x);
            return -std::log(p.b - p.a);
          },
          [&](const TruncatedJeffreys& p) -> double {
            if (x < p.a || x > p.b) outside("TruncatedJeffreys", x);
            return -std::log(std::log(p.b / p.a)) - std::log(x);
          },
          [&](const NegativeBinomial& p) -> double {
            require_integer(x, "NegativeBinomial");
            if (x < 0) outside("NegativeBinomial", x);
            const double fail = x == 0.0 ? 0.0 : x * std::log1p(-p.theta);
            return log_gamma_fn(x + p.n) - log_gamma_fn(p.n) - log_factorial(x) + p.n * std::log(p.theta) +
                   fail;
          },
          [&](const MultivariateGauss&) -> double {
            return log_density(d, Eigen::VectorXd::Constant(1, x));
          },
          [&](const MultivariateT&) -> double { return log_density(d, Eigen::VectorXd::Constant(1, x)); },
      },
      d.family());
}

double log_density(const Distribution& d, const Eigen::VectorXd& x) {
  auto check_dim = [&](Eigen::Index dim) {
    if (x.size() != dim) {
      throw DomainError(std::string(d.name()) + ": argument has dimension " + std::to_string(x.size()) +
                        ", expected " + std::to_string(dim));
    }
  };
  if (const auto* g = std::get_if<MultivariateGauss>(&d.family())) {
    check_dim(g->mu.size());
    const Eigen::MatrixXd l = cholesky_lower(g->cov);
    const double m = static_cast<double>(g->mu.size());
    return -0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det_from_cholesky(l) + mahalanobis_sq(l, x - g->mu));
  }
  if (const auto* t = std::get_if<MultivariateT>(&d.family())) {
    check_dim(t->mu.size());
    const Eigen::MatrixXd l = cholesky_lower(t->scale);
    const double m = static_cast<double>(t->mu.size());
    return log_gamma_fn(0.5 * (t->nu + m)) - log_gamma_fn(0.5 * t->nu) -
           0.5 * m * std::log(std::numbers::pi * t->nu) - 0.5 * log_det_from_cholesky(l) -
           0.5 * (t->nu + m) * std::log1p(mahalanobis_sq(l, x - t->mu) / t->nu);
  }
  check_dim(1);
  return log_density(d, x(0));
}

double log_density_or_neg_inf(const Distribution& d, double x) {
  const Support s = support(d);
  if (x < s.lo || x > s.hi) return -kInf;
  if (d.is_discrete() && !is_integer(x)) return -kInf;
  return log_density(d, x);
}

// ---------------------------------------------------------------------------
// CDF, moments, support

double cdf(const Distribution& d, double x) {
  if (std::isnan(x)) throw DomainError(std::string(d.name()) + ": NaN argument");
  return std::visit(
      Overloaded{
          [&](const Bernoulli& p) -> double {
            if (x < 0.0) return 0.0;
            return x < 1.0 ? 1.0 - p.theta : 1.0;
          },
          [&](const Binomial& p) -> double {
            const double k = std::floor(x);
            if (k < 0.0) return 0.0;
            if (k >= static_cast<double>(p.n)) return 1.0;
            if (p.theta == 0.0) return 1.0;
            if (p.theta == 1.0) return 0.0;
            return incomplete_beta(static_cast<double>(p.n) - k, k + 1.0, 1.0 - p.theta);
          },
          [&](const Poisson& p) -> double {
            const double k = std::floor(x);
            if (k < 0.0) return 0.0;
            if (std::isinf(k)) return 1.0;
            return gamma_q(k + 1.0, p.theta);
          },
          [&](const Gauss& p) -> double { return std_normal_cdf((x - p.mu) / p.sigma); },
          [&](const NoncentralT& p) -> double { return t_cdf((x - p.mu) / p.sigma, p.nu); },
          [&](const Exponential& p) -> double { return x <= 0.0 ? 0.0 : -std::expm1(-p.theta * x); },
          [&](const Pareto& p) -> double { return x <= p.y_min ? 0.0 : -std::expm1(p.theta * std::log(p.y_min / x)); },
          [&](const Beta& p) -> double { return incomplete_beta(p.alpha, p.beta, x); },
          [&](const Gamma& p) -> double { return gamma_p(p.alpha, p.beta * x); },
          [&](const InverseGamma& p) -> double { return x <= 0.0 ? 0.0 : gamma_q(p.alpha, p.beta / x); },
          [&](const Cauchy& p) -> double { return 0.5 + std::atan((x - p.x0) / p.gamma) / std::numbers::pi; },
          [&](const Laplace& p) -> double {
            const double z = (x - p.mu) / p.b;
            return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
          },
          [&](const DiscreteUniform& p) -> double {
            const double k = std::clamp(std::floor(x), 0.0, static_cast<double>(p.k));
            return k / static_cast<double>(p.k);
          },
          [&](const ContinuousUniform& p) -> double { return std::clamp((x - p.a) / (p.b - p.a), 0.0, 1.0); },
          [&](const TruncatedJeffreys& p) -> double {
            if (x <= p.a) return 0.0;
            if (x >= p.b) return 1.0;
            return std::log(x / p.a) / std::log(p.b / p.a);
          },
          [&](const NegativeBinomial& p) -> double {
            const double k = std::floor(x);
            if (k < 0.0) return 0.0;
            if (std::isinf(k) || p.theta == 1.0) return 1.0;
            return incomplete_beta(p.n, k + 1.0, p.theta);
          },
          [&](const MultivariateGauss&) -> double {
            throw ParameterError("cdf is not defined for multivariate families");
          },
          [&](const MultivariateT&) -> double {
            throw ParameterError("cdf is not defined for multivariate families");
          },
      },
      d.family());
}

Support support(const Distribution& d) {
  return std::visit(
      Overloaded{
          [](const Bernoulli&) { return Support{0.0, 1.0}; },
          [](const Binomial& p) { return Support{0.0, static_cast<double>(p.n)}; },
          [](const Poisson&) { return Support{0.0, kInf}; },
          [](const Exponential&) { return Support{0.0, kInf}; },
          [](const Pareto& p) { return Support{p.y_min, kInf}; },
          [](const Beta&) { return Support{0.0, 1.0}; },
          [](const Gamma&) { return Support{0.0, kInf}; },
          [](const InverseGamma&) { return Support{0.0, kInf}; },
          [](const DiscreteUniform& p) { return Support{1.0, static_cast<double>(p.k)}; },
          [](const ContinuousUniform& p) { return Support{p.a, p.b}; },
          [](const TruncatedJeffreys& p) { return Support{p.a, p.b}; },
          [](const NegativeBinomial&) { return Support{0.0, kInf}; },
          [](const auto&) { return Support{-kInf, kInf}; },
      },
      d.family());
}

Moments moments(const Distribution& d) {
  return std::visit(
      Overloaded{
          [](const Bernoulli& p) { return Moments{p.theta, p.theta * (1.0 - p.theta)}; },
          [](const Binomial& p) {
            const double n = static_cast<double>(p.n);
            return Moments{n * p.theta, n * p.theta * (1.0 - p.theta)};
          },
          [](const Poisson& p) { return Moments{p.theta, p.theta}; },
          [](const Gauss& p) { return Moments{p.mu, p.sigma * p.sigma}; },
          [](const NoncentralT& p) {
            Moments m;
            if (p.nu > 1.0) m.mean = p.mu;
            if (p.nu > 2.0) m.variance = p.nu / (p.nu - 2.0) * p.sigma * p.sigma;
            return m;
          },
          [](const Exponential& p) { return Moments{1.0 / p.theta, 1.0 / (p.theta * p.theta)}; },
          [](const Pareto& p) {
            Moments m;
            if (p.theta > 1.0) m.mean = p.theta * p.y_min / (p.theta - 1.0);
            if (p.theta > 2.0) {
              m.variance = p.y_min * p.y_min * p.theta / ((p.theta - 1.0) * (p.theta - 1.0) * (p.theta - 2.0));
            }
            return m;
          },
          [](const Beta& p) {
            const double s = p.alpha + p.beta;
            return Moments{p.alpha / s, p.alpha * p.beta / (s * s * (s + 1.0))};
          },
          [](const Gamma& p) { return Moments{p.alpha / p.beta, p.alpha / (p.beta * p.beta)}; },
          [](const InverseGamma& p) {
            Moments m;
            if (p.alpha > 1.0) m.mean = p.beta / (p.alpha - 1.0);
            if (p.alpha > 2.0) {
              m.variance = p.beta * p.beta / ((p.alpha - 1.0) * (p.alpha - 1.0) * (p.alpha - 2.0));
            }
            return m;
          },
          [](const Cauchy&) { return Moments{}; },
          [](const Laplace& p) { return Moments{p.mu, 2.0 * p.b * p.b}; },
          [](const DiscreteUniform& p) {
            const double k = static_cast<double>(p.k);
            return Moments{0.5 * (k + 1.0), (k * k - 1.0) / 12.0};
          },
          [](const ContinuousUniform& p) {
            const double w = p.b - p.a;
            return Moments{0.5 * (p.a + p.b), w * w / 12.0};
          },
          [](const TruncatedJeffreys& p) {
            const double l = std::log(p.b / p.a);
            const double mean = (p.b - p.a) / l;
            const double second = (p.b * p.b - p.a * p.a) / (2.0 * l);
            return Moments{mean, second - mean * mean};
          },
          [](const NegativeBinomial& p) {
            return Moments{p.n * (1.0 - p.theta) / p.theta, p.n * (1.0 - p.theta) / (p.theta * p.theta)};
          },
          [](const MultivariateGauss&) -> Moments {
            throw ParameterError("use mv_moments for multivariate families");
          },
          [](const MultivariateT&) -> Moments {
            throw ParameterError("use mv_moments for multivariate families");
          },
      },
      d.family());
}

MvMoments mv_moments(const Distribution& d) {
  if (const auto* g = std::get_if<MultivariateGauss>(&d.family())) return MvMoments{g->mu, g->cov};
  if (const auto* t = std::get_if<MultivariateT>(&d.family())) {
    MvMoments m;
    if (t->nu > 1.0) m.mean = t->mu;
    if (t->nu > 2.0) m.covariance = t->scale * (t->nu / (t->nu - 2.0));
    return m;
  }
  const Moments m = moments(d);
  MvMoments out;
  if (m.mean) out.mean = Eigen::VectorXd::Constant(1, *m.mean);
  if (m.variance) out.covariance = Eigen::MatrixXd::Constant(1, 1, *m.variance);
  return out;
}

// ---------------------------------------------------------------------------
// quantiles

double quantile(const Distribution& d, double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in (0,1)");
  return std::visit(
      Overloaded{
          [&](const Bernoulli& q) -> double { return p <= 1.0 - q.theta ? 0.0 : 1.0; },
          [&](const Binomial& q) -> double { return invert_discrete(d, p, 0.0, static_cast<double>(q.n)); },
          [&](const Poisson&) -> double { return invert_discrete(d, p, 0.0, kInf); },
          [&](const NegativeBinomial&) -> double { return invert_discrete(d, p, 0.0, kInf); },
          [&](const DiscreteUniform& q) -> double {
            return std::max(1.0, std::ceil(p * static_cast<double>(q.k) - 1e-12));
          },
          [&](const Gauss& q) -> double { return invert_continuous(d, p, q.mu, q.sigma); },
          [&](const NoncentralT& q) -> double { return invert_continuous(d, p, q.mu, q.sigma); },
          [&](const Exponential& q) -> double { return -std::log1p(-p) / q.theta; },
          [&](const Pareto& q) -> double { return q.y_min * std::pow(1.0 - p, -1.0 / q.theta); },
          [&](const Beta& q) -> double { return invert_continuous(d, p, q.alpha / (q.alpha + q.beta), 0.25); },
          [&](const Gamma& q) -> double {
            return invert_continuous(d, p, q.alpha / q.beta, std::sqrt(q.alpha) / q.beta);
          },
          [&](const InverseGamma& q) -> double {
            return invert_continuous(d, p, q.beta / (q.alpha + 1.0), q.beta / (q.alpha + 1.0));
          },
          [&](const Cauchy& q) -> double { return q.x0 + q.gamma * std::tan(std::numbers::pi * (p - 0.5)); },
          [&](const Laplace& q) -> double {
            return p < 0.5 ? q.mu + q.b * std::log(2.0 * p) : q.mu - q.b * std::log(2.0 * (1.0 - p));
          },
          [&](const ContinuousUniform& q) -> double { return q.a + p * (q.b - q.a); },
          [&](const TruncatedJeffreys& q) -> double { return q.a * std::pow(q.b / q.a, p); },
          [&](const MultivariateGauss&) -> double {
            throw ParameterError("quantile is not defined for multivariate families");
          },
          [&](const MultivariateT&) -> double {
            throw ParameterError("quantile is not defined for multivariate families");
          },
      },
      d.family());
}

// ---------------------------------------------------------------------------
// sampling

double draw(const Distribution& d, Rng& rng) {
  return std::visit(
      Overloaded{
          [&](const Bernoulli& p) -> double { return rng.uniform() < p.theta ? 1.0 : 0.0; },
          [&](const Binomial& p) -> double {
            if (p.n == 0 || p.theta == 0.0) return 0.0;
            if (p.theta == 1.0) return static_cast<double>(p.n);
            std::binomial_distribution<std::int64_t> b(p.n, p.theta);
            return static_cast<double>(b(rng));
          },
          [&](const Poisson& p) -> double {
            std::poisson_distribution<std::int64_t> pd(p.theta);
            return static_cast<double>(pd(rng));
          },
          [&](const Gauss& p) -> double { return p.mu + p.sigma * rng.normal(); },
          [&](const NoncentralT& p) -> double {
            const double chi2 = 2.0 * gamma_draw(0.5 * p.nu, rng);
            return p.mu + p.sigma * rng.normal() / std::sqrt(chi2 / p.nu);
          },
          [&](const Exponential& p) -> double { return -std::log(rng.uniform()) / p.theta; },
          [&](const Pareto& p) -> double { return p.y_min * std::pow(rng.uniform(), -1.0 / p.theta); },
          [&](const Beta& p) -> double {
            const double x = gamma_draw(p.alpha, rng);
            const double y = gamma_draw(p.beta, rng);
            return x / (x + y);
          },
          [&](const Gamma& p) -> double { return gamma_draw(p.alpha, rng) / p.beta; },
          [&](const InverseGamma& p) -> double { return p.beta / gamma_draw(p.alpha, rng); },
          [&](const Cauchy& p) -> double {
            return p.x0 + p.gamma * std::tan(std::numbers::pi * (rng.uniform() - 0.5));
          },
          [&](const Laplace& p) -> double {
            const double u = rng.uniform() - 0.5;
            return p.mu - p.b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
          },
          [&](const DiscreteUniform& p) -> double {
            const double k = static_cast<double>(p.k);
            return std::min(k, 1.0 + std::floor(rng.uniform() * k));
          },
          [&](const ContinuousUniform& p) -> double { return p.a + (p.b - p.a) * rng.uniform(); },
          [&](const TruncatedJeffreys& p) -> double { return p.a * std::pow(p.b / p.a, rng.uniform()); },
          [&](const NegativeBinomial& p) -> double {
            if (p.theta == 1.0) return 0.0;
            // Gamma-Poisson mixture: rate ~ Ga(n, theta / (1 - theta)).
            const double rate = gamma_draw(p.n, rng) * (1.0 - p.theta) / p.theta;
            if (rate <= 0.0) return 0.0;
            std::poisson_distribution<std::int64_t> pd(rate);
            return static_cast<double>(pd(rng));
          },
          [&](const MultivariateGauss&) -> double {
            throw ParameterError("use sample_mv for multivariate families");
          },
          [&](const MultivariateT&) -> double {
            throw ParameterError("use sample_mv for multivariate families");
          },
      },
      d.family());
}

std::vector<double> sample(const Distribution& d, Rng& rng, std::size_t count) {
  if (count == 0) throw ParameterError("sample: count must be >= 1");
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(d, rng));
  return out;
}

Eigen::MatrixXd sample_mv(const Distribution& d, Rng& rng, std::size_t count) {
  if (count == 0) throw ParameterError("sample: count must be >= 1");
  if (const auto* g = std::get_if<MultivariateGauss>(&d.family())) {
    const Eigen::MatrixXd l = cholesky_lower(g->cov);
    const auto dim = g->mu.size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), dim);
    Eigen::VectorXd z(dim);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) z(j) = rng.normal();
      out.row(i) = (g->mu + l * z).transpose();
    }
    return out;
  }
  if (d.is<MultivariateT>()) {
    throw ParameterError("MultivariateT sampling is not supported (density only)");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), 1);
  for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, 0) = draw(d, rng);
  return out;
}

}  // namespace bayescore::dist
