#include "bayescore/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/special_functions/digamma.hpp>
#include <fmt/format.h>

namespace bayescore::glm {

using namespace dist;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLn2Pi = 1.8378770664093454836;
constexpr double kLn2 = 0.69314718055994530942;

double digamma(double x) { return boost::math::digamma(x); }

double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

bool is_real_line(const Distribution& d) {
  return d.is<Gauss>() || d.is<Cauchy>() || d.is<Laplace>() || d.is<NoncentralT>();
}

double real_line_dlog(const Distribution& d, double x) {
  if (d.is<Gauss>()) {
    const auto& g = d.as<Gauss>();
    return -(x - g.mu) / (g.sigma * g.sigma);
  }
  if (d.is<Cauchy>()) {
    const auto& c = d.as<Cauchy>();
    const double r = x - c.x0;
    return -2.0 * r / (c.gamma * c.gamma + r * r);
  }
  if (d.is<Laplace>()) {
    const auto& l = d.as<Laplace>();
    return x > l.mu ? -1.0 / l.b : (x < l.mu ? 1.0 / l.b : 0.0);
  }
  const auto& t = d.as<NoncentralT>();
  const double r = x - t.mu;
  return -(t.nu + 1.0) * r / (t.nu * t.sigma * t.sigma + r * r);
}

void require_real_line(const Distribution& d, const std::string& what) {
  if (!is_real_line(d)) {
    throw SpecError(fmt::format("prior for {} must be gauss, cauchy, laplace or student_t (real-line support), got {}",
                                what, d.name()));
  }
}

void require_positive(const PositivePrior& p, const std::string& what) {
  const Distribution& d = p.d;
  if (d.is<Gamma>() || d.is<InverseGamma>() || d.is<Exponential>() || d.is<TruncatedJeffreys>()) return;
  if (d.is<Gauss>() && d.as<Gauss>().mu == 0.0) return;
  if (d.is<Cauchy>() && d.as<Cauchy>().x0 == 0.0) return;
  if (d.is<ContinuousUniform>() && d.as<ContinuousUniform>().a >= 0.0) return;
  throw SpecError(fmt::format("prior for {} must live on the positive half-line (gamma, inverse_gamma, exponential, "
                              "half gauss/cauchy with location 0, truncated_jeffreys, uniform), got {}",
                              what, d.name()));
}

double positive_power(PriorOn on) {
  switch (on) {
    case PriorOn::Value: return 1.0;
    case PriorOn::Variance: return 2.0;
    case PriorOn::Precision: return -2.0;
  }
  return 1.0;
}

// Log density of q > 0 and its q-derivative; half-distributions doubled.
double positive_log_density(const Distribution& d, double q, double* dq) {
  double lf = log_density_or_neg_inf(d, q);
  if (d.is<Gamma>()) {
    const auto& g = d.as<Gamma>();
    *dq = (g.alpha - 1.0) / q - g.beta;
  } else if (d.is<InverseGamma>()) {
    const auto& g = d.as<InverseGamma>();
    *dq = -(g.alpha + 1.0) / q + g.beta / (q * q);
  } else if (d.is<Exponential>()) {
    *dq = -d.as<Exponential>().theta;
  } else if (d.is<Gauss>()) {
    const double s = d.as<Gauss>().sigma;
    lf += kLn2;
    *dq = -q / (s * s);
  } else if (d.is<Cauchy>()) {
    const double g = d.as<Cauchy>().gamma;
    lf += kLn2;
    *dq = -2.0 * q / (g * g + q * q);
  } else if (d.is<TruncatedJeffreys>()) {
    *dq = -1.0 / q;
  } else {
    *dq = 0.0;
  }
  return lf;
}

// Prior on u = log(base) when the stated prior is on base^c.
double positive_prior_u(const PositivePrior& p, double u, double* du) {
  const double c = positive_power(p.on);
  const double q = std::exp(c * u);
  double dq = 0.0;
  const double lf = positive_log_density(p.d, q, &dq);
  if (!std::isfinite(lf)) {
    *du = 0.0;
    return kNegInf;
  }
  *du = dq * c * q + c;
  return lf + std::log(std::abs(c)) + c * u;
}

// sigma^2 ~ IG(alpha, beta) form of a dispersion prior, when it has one.
std::optional<std::pair<double, double>> inverse_gamma_form(const PositivePrior& p) {
  if (p.on == PriorOn::Variance && p.d.is<InverseGamma>()) {
    return std::make_pair(p.d.as<InverseGamma>().alpha, p.d.as<InverseGamma>().beta);
  }
  if (p.on == PriorOn::Precision && p.d.is<Gamma>()) {
    return std::make_pair(p.d.as<Gamma>().alpha, p.d.as<Gamma>().beta);
  }
  return std::nullopt;
}

bool is_indicator(const Eigen::VectorXd& col) {
  return (col.array() == 0.0 || col.array() == 1.0).all();
}

double sample_sd(const Eigen::VectorXd& v, double mean) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

// DesignMatrix ------------------------------------------------------------

DesignMatrix DesignMatrix::from_predictors(const Eigen::MatrixXd& predictors, std::vector<std::string> names) {
  if (static_cast<std::size_t>(predictors.cols()) != names.size()) {
    throw DimensionError(
        fmt::format("{} predictor names for {} predictor columns", names.size(), predictors.cols()));
  }
  DesignMatrix d;
  d.x.resize(predictors.rows(), predictors.cols() + 1);
  d.x.col(0).setOnes();
  d.x.rightCols(predictors.cols()) = predictors;
  d.names.reserve(names.size() + 1);
  d.names.push_back("(intercept)");
  for (auto& n : names) d.names.push_back(std::move(n));
  return d;
}

DesignMatrix DesignMatrix::intercept_only(std::size_t n) {
  return from_predictors(Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0), {});
}

void DesignMatrix::validate() const {
  if (x.cols() < 1) throw DimensionError("design matrix needs the ones column");
  if (names.size() != columns()) {
    throw DimensionError(fmt::format("design matrix has {} columns but {} names", x.cols(), names.size()));
  }
  if (!x.allFinite()) throw DomainError("design matrix has non-finite entries");
  if (!(x.col(0).array() == 1.0).all()) throw DimensionError("first design column must be all ones");
  if (x.rows() < 2) return;
  for (Eigen::Index j = 1; j < x.cols(); ++j) {
    if ((x.col(j).array() == x(0, j)).all()) {
      throw ZeroVarianceError(fmt::format("column '{}' is constant", names[static_cast<std::size_t>(j)]));
    }
  }
}

// Links -------------------------------------------------------------------

double apply_inverse_link(Link link, double z) {
  switch (link) {
    case Link::Identity: return z;
    case Link::Logistic: return logistic(z);
    case Link::NaturalExp: return std::exp(z);
    case Link::NegativeInverse:
      if (!(z < 0.0)) throw DomainError(fmt::format("negative inverse link needs a negative linear form, got {}", z));
      return -1.0 / z;
  }
  throw DomainError("unknown link");
}

std::string link_name(Link link) {
  switch (link) {
    case Link::Identity: return "identity";
    case Link::Logistic: return "logistic";
    case Link::NaturalExp: return "natural_exp";
    case Link::NegativeInverse: return "negative_inverse";
  }
  return "?";
}

Link parse_link(const std::string& name) {
  if (name == "identity") return Link::Identity;
  if (name == "logistic" || name == "logit") return Link::Logistic;
  if (name == "natural_exp" || name == "log") return Link::NaturalExp;
  if (name == "negative_inverse") return Link::NegativeInverse;
  throw SpecError(fmt::format("link: unknown link function '{}'", name));
}

std::string likelihood_name(const Likelihood& lik) {
  static const char* names[] = {"gauss",       "student_t", "bernoulli", "binomial",
                                "poisson",     "exponential", "anova",   "negative_binomial"};
  return names[lik.index()];
}

namespace {

Link required_link(const Likelihood& lik) {
  return std::visit(
      [](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, BernoulliLik> || std::is_same_v<L, BinomialLik>) return Link::Logistic;
        if constexpr (std::is_same_v<L, PoissonLik> || std::is_same_v<L, NegativeBinomialLik>) return Link::NaturalExp;
        if constexpr (std::is_same_v<L, ExponentialLik>) return Link::NegativeInverse;
        return Link::Identity;
      },
      lik);
}

void validate_coefficient_prior(const PriorSpec& p, const std::string& what) {
  if (std::holds_alternative<Adaptive>(p)) {
    throw SpecError(fmt::format("priors: adaptive prior is only allowed for the group intercepts, not {}", what));
  }
  if (const auto* f = std::get_if<Fixed>(&p)) require_real_line(f->d, what);
  if (const auto* t = std::get_if<TruncatedGauss>(&p)) {
    if (!(t->sigma0 > 0.0) || !std::isfinite(t->mu0) || !std::isfinite(t->upper_bound)) {
      throw SpecError(fmt::format("priors: truncated gauss for {} needs finite mu0, upper_bound and sigma0 > 0", what));
    }
  }
}

}  // namespace

void ModelSpec::validate() const {
  const Link need = required_link(likelihood);
  if (link != need) {
    throw SpecError(fmt::format("likelihood '{}' pairs only with link '{}', got link '{}'",
                                likelihood_name(likelihood), link_name(need), link_name(link)));
  }
  if (intercept_prior) validate_coefficient_prior(*intercept_prior, "the intercept");
  for (const auto& p : slope_priors) validate_coefficient_prior(p, "a slope");
  if (group_prior) {
    if (std::holds_alternative<TruncatedGauss>(*group_prior)) {
      throw SpecError("priors: group intercepts take a fixed or adaptive prior");
    }
    if (const auto* f = std::get_if<Fixed>(&*group_prior)) require_real_line(f->d, "group intercepts");
    if (const auto* a = std::get_if<Adaptive>(&*group_prior)) {
      require_real_line(a->location, "the adaptive location");
      require_positive(a->scale, "the adaptive scale");
    }
  }
  if (dispersion_prior) require_positive(*dispersion_prior, "the dispersion");
  if (const auto* t = std::get_if<StudentTLik>(&likelihood)) require_positive(t->nu_prior, "nu - 2");
  if (const auto* a = std::get_if<AnovaCellMeansLik>(&likelihood)) {
    require_positive(a->nu_prior, "nu - 2");
    require_positive(PositivePrior{a->shape_rate_prior, PriorOn::Value}, "alpha and beta");
  }
  if (const auto* nb = std::get_if<NegativeBinomialLik>(&likelihood)) require_positive(nb->size_prior, "size");
}

// Groups ------------------------------------------------------------------

Groups Groups::from_labels(const std::vector<std::string>& row_labels) {
  Groups g;
  std::map<std::string, int> seen;
  g.index.reserve(row_labels.size());
  for (const auto& l : row_labels) {
    auto [it, inserted] = seen.emplace(l, static_cast<int>(g.labels.size()) + 1);
    if (inserted) g.labels.push_back(l);
    g.index.push_back(it->second);
  }
  g.n_groups = static_cast<int>(g.labels.size());
  return g;
}

void Groups::validate(std::size_t n_rows) const {
  if (index.size() != n_rows) {
    throw DimensionError(fmt::format("{} group indices for {} rows", index.size(), n_rows));
  }
  if (n_groups < 1) throw DimensionError("at least one group is needed");
  if (labels.size() != static_cast<std::size_t>(n_groups)) {
    throw DimensionError(fmt::format("{} group labels for {} groups", labels.size(), n_groups));
  }
  for (int g : index) {
    if (g < 1 || g > n_groups) throw DimensionError(fmt::format("group index {} outside [1, {}]", g, n_groups));
  }
}

// Standardisation -----------------------------------------------------------

Standardization Standardization::identity(std::size_t columns) {
  Standardization s;
  s.x_mean.assign(columns, 0.0);
  s.x_sd.assign(columns, 1.0);
  s.x_standardized.assign(columns, false);
  return s;
}

Standardized standardize(const Vector& y, const DesignMatrix& x, bool standardize_y) {
  if (static_cast<std::size_t>(y.size()) != x.rows()) {
    throw DimensionError(fmt::format("{} responses for {} design rows", y.size(), x.rows()));
  }
  Standardized out{y, x, Standardization::identity(x.columns())};
  for (std::size_t j = 1; j < x.columns(); ++j) {
    const auto col = x.x.col(static_cast<Eigen::Index>(j));
    if (is_indicator(col)) continue;
    const double m = col.mean();
    const double sd = sample_sd(col, m);
    if (!(sd > 0.0)) throw ZeroVarianceError(fmt::format("column '{}' has zero variance", x.names[j]));
    out.meta.x_mean[j] = m;
    out.meta.x_sd[j] = sd;
    out.meta.x_standardized[j] = true;
    out.zx.x.col(static_cast<Eigen::Index>(j)) = (col.array() - m) / sd;
  }
  if (standardize_y) {
    const double m = y.mean();
    const double sd = sample_sd(y, m);
    if (!(sd > 0.0)) throw ZeroVarianceError("response column has zero variance");
    out.meta.y_standardized = true;
    out.meta.y_mean = m;
    out.meta.y_sd = sd;
    out.zy = (y.array() - m) / sd;
  }
  return out;
}

DesignMatrix apply_standardization(const Standardization& meta, const DesignMatrix& x) {
  if (x.columns() != meta.columns()) {
    throw MetaMismatchError(fmt::format("design has {} columns, transform has {}", x.columns(), meta.columns()));
  }
  DesignMatrix z = x;
  for (std::size_t j = 0; j < meta.columns(); ++j) {
    if (!meta.x_standardized[j]) continue;
    const auto c = static_cast<Eigen::Index>(j);
    z.x.col(c) = (x.x.col(c).array() - meta.x_mean[j]) / meta.x_sd[j];
  }
  return z;
}

Vector destandardize(const Standardization& meta, const Vector& zb) {
  if (static_cast<std::size_t>(zb.size()) != meta.columns()) {
    throw MetaMismatchError(
        fmt::format("{} coefficients for a transform over {} design columns", zb.size(), meta.columns()));
  }
  Vector b(zb.size());
  double shift = 0.0;
  for (std::size_t j = 1; j < meta.columns(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    b(i) = zb(i) * meta.y_sd / meta.x_sd[j];
    shift += b(i) * meta.x_mean[j];
  }
  b(0) = zb(0) * meta.y_sd + meta.y_mean - shift;
  return b;
}

double destandardize_scale(const Standardization& meta, double z_scale) { return z_scale * meta.y_sd; }

AnovaRecentred anova_recenter(double mu0, const Vector& mu_g) {
  if (mu_g.size() == 0) return {mu0, Vector()};
  const Vector proxy = mu_g.array() + mu0;
  const double a0 = proxy.mean();
  return {a0, proxy.array() - a0};
}

// Model -------------------------------------------------------------------

namespace detail {

enum class Family { Gauss, StudentT, Binomial, Poisson, NegBin, Exponential };

struct CoefSlot {
  int index = -1;
  bool truncated = false;
  Distribution prior = Gauss{0.0, 1.0};
  TruncatedGauss trunc{0.0, 1.0, 0.0};
  double log_trunc_mass = 0.0;
};

class Model {
 public:
  Family family = Family::Gauss;
  bool anova = false;
  Standardization meta;
  Eigen::MatrixXd z;
  std::vector<std::string> col_names;
  Vector y;  // working scale
  Vector y_raw;
  Vector trials;
  Vector log_choose_trials;
  Vector offset;
  Vector log_fact_y;
  std::vector<int> grp;  // 0-based
  int n_groups = 0;
  std::vector<std::string> group_labels;
  std::vector<std::vector<int>> rows_of_group;

  std::vector<CoefSlot> coef;  // one per design column; coef[0].index < 0 when grouped
  std::vector<int> group_idx;
  bool group_adaptive = false;
  bool separate_constant = false;
  Distribution group_fixed_prior = Gauss{0.0, 1.0};
  int centre_idx = -1;
  Distribution centre_prior = Gauss{0.0, 1.0};
  int log_omega_idx = -1;
  PositivePrior omega_prior{InverseGamma{1.0, 1.0}, PriorOn::Variance};

  std::vector<int> log_sigma_idx;
  bool hetero = false;
  PositivePrior sigma_prior{InverseGamma{0.01, 0.01}, PriorOn::Variance};
  bool adaptive_dispersion = false;
  int log_alpha_idx = -1;
  int log_beta_idx = -1;
  Distribution shape_rate_prior = Gamma{1.0, 1.0};
  int log_nu_idx = -1;
  PositivePrior nu_prior{Exponential{1.0 / 29.0}, PriorOn::Value};
  int log_size_idx = -1;
  PositivePrior size_prior{Gamma{2.0, 0.1}, PriorOn::Value};

  std::vector<std::string> names;
  std::vector<std::string> derived_names;
  int dim = 0;

  struct State {
    Vector b;
    Vector db;
    Vector a;
    double centre = 0.0;
    double omega = 1.0;
    Vector log_sigma;
    double nu = 0.0;
    double size = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
  };

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }

  int slot_of_row(std::size_t i) const { return hetero ? grp[i] : 0; }

  State unpack(const Vector& th) const {
    State s;
    const auto k = static_cast<Eigen::Index>(coef.size());
    s.b = Vector::Zero(k);
    s.db = Vector::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& c = coef[static_cast<std::size_t>(j)];
      if (c.index < 0) continue;
      const double u = th(c.index);
      if (c.truncated) {
        const double e = std::exp(u);
        s.b(j) = c.trunc.upper_bound - e;
        s.db(j) = -e;
      } else {
        s.b(j) = u;
        s.db(j) = 1.0;
      }
    }
    s.a.resize(n_groups);
    for (int g = 0; g < n_groups; ++g) s.a(g) = th(group_idx[static_cast<std::size_t>(g)]);
    if (centre_idx >= 0) s.centre = th(centre_idx);
    if (log_omega_idx >= 0) s.omega = std::exp(th(log_omega_idx));
    s.log_sigma.resize(static_cast<Eigen::Index>(log_sigma_idx.size()));
    for (std::size_t i = 0; i < log_sigma_idx.size(); ++i) s.log_sigma(static_cast<Eigen::Index>(i)) = th(log_sigma_idx[i]);
    if (log_nu_idx >= 0) s.nu = 2.0 + std::exp(th(log_nu_idx));
    if (log_size_idx >= 0) s.size = std::exp(th(log_size_idx));
    if (log_alpha_idx >= 0) s.alpha = std::exp(th(log_alpha_idx));
    if (log_beta_idx >= 0) s.beta = std::exp(th(log_beta_idx));
    return s;
  }

  double row_eta(const State& s, const double* zrow_begin, Eigen::Index stride, int g) const {
    double eta = 0.0;
    for (std::size_t j = 0; j < coef.size(); ++j) {
      if (coef[j].index >= 0) eta += zrow_begin[static_cast<Eigen::Index>(j) * stride] * s.b(static_cast<Eigen::Index>(j));
    }
    if (n_groups > 0) {
      eta += s.a(g);
      if (separate_constant) eta += s.centre;
    }
    return eta;
  }

  Vector eta(const State& s) const {
    Vector e = offset;
    for (std::size_t j = 0; j < coef.size(); ++j) {
      if (coef[j].index >= 0) e += z.col(static_cast<Eigen::Index>(j)) * s.b(static_cast<Eigen::Index>(j));
    }
    if (n_groups > 0) {
      for (std::size_t i = 0; i < n(); ++i) {
        e(static_cast<Eigen::Index>(i)) += s.a(grp[i]) + (separate_constant ? s.centre : 0.0);
      }
    }
    return e;
  }

  // Working-scale log-likelihood; optional gradient (added into grad) and pointwise values.
  double log_lik(const Vector& th, Vector* grad, Vector* pointwise) const {
    const State s = unpack(th);
    const Vector e = eta(s);
    const std::size_t nn = n();
    Vector g_eta;
    if (grad) g_eta = Vector::Zero(static_cast<Eigen::Index>(nn));
    Vector g_sigma = Vector::Zero(s.log_sigma.size());
    double g_nu = 0.0, g_size = 0.0;
    if (pointwise) pointwise->resize(static_cast<Eigen::Index>(nn));
    double total = 0.0;

    double t_const = 0.0, t_dconst = 0.0;
    if (family == Family::StudentT) {
      const double nu = s.nu;
      t_const = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI);
      t_dconst = 0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu;
    }
    double nb_log_n = 0.0, nb_lgamma_n = 0.0, nb_digamma_n = 0.0;
    if (family == Family::NegBin) {
      nb_log_n = std::log(s.size);
      nb_lgamma_n = std::lgamma(s.size);
      if (grad) nb_digamma_n = digamma(s.size);
    }

    for (std::size_t i = 0; i < nn; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double et = e(ii);
      const double yi = y(ii);
      double l = 0.0, d_eta = 0.0;
      switch (family) {
        case Family::Gauss: {
          const int sl = slot_of_row(i);
          const double ls = s.log_sigma(sl);
          const double inv_var = std::exp(-2.0 * ls);
          const double r = yi - et;
          l = -0.5 * kLn2Pi - ls - 0.5 * r * r * inv_var;
          d_eta = r * inv_var;
          if (grad) g_sigma(sl) += -1.0 + r * r * inv_var;
          break;
        }
        case Family::StudentT: {
          const int sl = slot_of_row(i);
          const double ls = s.log_sigma(sl);
          const double nu = s.nu;
          const double r = yi - et;
          const double q = r * r * std::exp(-2.0 * ls);
          const double lq = std::log1p(q / nu);
          l = t_const - ls - 0.5 * (nu + 1.0) * lq;
          if (grad) {
            d_eta = (nu + 1.0) * r * std::exp(-2.0 * ls) / (nu + q);
            g_sigma(sl) += -1.0 + (nu + 1.0) * q / (nu + q);
            g_nu += t_dconst - 0.5 * lq + (nu + 1.0) * q / (2.0 * nu * (nu + q));
          }
          break;
        }
        case Family::Binomial: {
          const double m = trials(ii);
          l = log_choose_trials(ii) + yi * et - m * log1pexp(et);
          d_eta = yi - m * logistic(et);
          break;
        }
        case Family::Poisson: {
          const double mu = std::exp(et);
          l = yi * et - mu - log_fact_y(ii);
          d_eta = yi - mu;
          break;
        }
        case Family::NegBin: {
          const double nsz = s.size;
          const double lden = log_add_exp(nb_log_n, et);  // ln(n + mu)
          l = std::lgamma(yi + nsz) - nb_lgamma_n - log_fact_y(ii) + nsz * (nb_log_n - lden) + yi * (et - lden);
          if (grad) {
            const double p_mu = std::exp(et - lden);  // mu / (n + mu)
            d_eta = nsz * (yi - std::exp(et)) / std::exp(lden);
            g_size += digamma(yi + nsz) - nb_digamma_n + (nb_log_n - lden) + 1.0 - (nsz + yi) / std::exp(lden);
            (void)p_mu;
          }
          break;
        }
        case Family::Exponential: {
          if (!(et < 0.0)) {
            if (grad) grad->setZero();
            if (pointwise) pointwise->setConstant(kNegInf);
            return kNegInf;
          }
          l = -std::log(-et) + yi / et;
          d_eta = -1.0 / et - yi / (et * et);
          break;
        }
      }
      total += l;
      if (pointwise) (*pointwise)(ii) = l;
      if (grad) g_eta(ii) = d_eta;
    }

    if (grad) {
      Vector& g = *grad;
      for (std::size_t j = 0; j < coef.size(); ++j) {
        if (coef[j].index < 0) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        g(coef[j].index) += z.col(jj).dot(g_eta) * s.db(jj);
      }
      if (n_groups > 0) {
        double sum = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
          g(group_idx[static_cast<std::size_t>(grp[i])]) += g_eta(static_cast<Eigen::Index>(i));
          sum += g_eta(static_cast<Eigen::Index>(i));
        }
        if (separate_constant) g(centre_idx) += sum;
      }
      for (std::size_t k = 0; k < log_sigma_idx.size(); ++k) g(log_sigma_idx[k]) += g_sigma(static_cast<Eigen::Index>(k));
      if (log_nu_idx >= 0) g(log_nu_idx) += g_nu * (s.nu - 2.0);
      if (log_size_idx >= 0) g(log_size_idx) += g_size * s.size;
    }
    return total;
  }

  double log_prior(const Vector& th, Vector* grad) const {
    const State s = unpack(th);
    double lp = 0.0;
    double d = 0.0;
    auto add_grad = [&](int idx, double v) {
      if (grad) (*grad)(idx) += v;
    };

    for (std::size_t j = 0; j < coef.size(); ++j) {
      const auto& c = coef[j];
      if (c.index < 0) continue;
      const double b = s.b(static_cast<Eigen::Index>(j));
      if (c.truncated) {
        const double r = (b - c.trunc.mu0) / c.trunc.sigma0;
        lp += -0.5 * kLn2Pi - std::log(c.trunc.sigma0) - 0.5 * r * r - c.log_trunc_mass + th(c.index);
        add_grad(c.index, (-r / c.trunc.sigma0) * s.db(static_cast<Eigen::Index>(j)) + 1.0);
      } else {
        lp += log_density(c.prior, b);
        add_grad(c.index, real_line_dlog(c.prior, b));
      }
    }

    if (n_groups > 0) {
      if (group_adaptive) {
        const double m = separate_constant ? 0.0 : s.centre;
        const double w = 1.0 / (s.omega * s.omega);
        const double lo = std::log(s.omega);
        double g_centre = 0.0, g_omega = 0.0;
        for (int g = 0; g < n_groups; ++g) {
          const double r = s.a(g) - m;
          lp += -0.5 * kLn2Pi - lo - 0.5 * r * r * w;
          add_grad(group_idx[static_cast<std::size_t>(g)], -r * w);
          g_centre += r * w;
          g_omega += -1.0 + r * r * w;
        }
        if (!separate_constant) add_grad(centre_idx, g_centre);
        add_grad(log_omega_idx, g_omega);
        lp += log_density(centre_prior, s.centre);
        add_grad(centre_idx, real_line_dlog(centre_prior, s.centre));
        lp += positive_prior_u(omega_prior, lo, &d);
        add_grad(log_omega_idx, d);
      } else {
        for (int g = 0; g < n_groups; ++g) {
          lp += log_density(group_fixed_prior, s.a(g));
          add_grad(group_idx[static_cast<std::size_t>(g)], real_line_dlog(group_fixed_prior, s.a(g)));
        }
      }
    }

    if (adaptive_dispersion) {
      const double al = s.alpha, be = s.beta;
      const double base = al * std::log(be) - std::lgamma(al) + kLn2;
      double g_al = 0.0, g_be = 0.0;
      for (std::size_t k = 0; k < log_sigma_idx.size(); ++k) {
        const double ls = s.log_sigma(static_cast<Eigen::Index>(k));
        const double inv_var = std::exp(-2.0 * ls);
        lp += base - 2.0 * al * ls - be * inv_var;
        add_grad(log_sigma_idx[k], -2.0 * al + 2.0 * be * inv_var);
        g_al += std::log(be) - digamma(al) - 2.0 * ls;
        g_be += al / be - inv_var;
      }
      add_grad(log_alpha_idx, g_al * al);
      add_grad(log_beta_idx, g_be * be);
      const PositivePrior hp{shape_rate_prior, PriorOn::Value};
      lp += positive_prior_u(hp, std::log(al), &d);
      add_grad(log_alpha_idx, d);
      lp += positive_prior_u(hp, std::log(be), &d);
      add_grad(log_beta_idx, d);
    } else {
      for (std::size_t k = 0; k < log_sigma_idx.size(); ++k) {
        lp += positive_prior_u(sigma_prior, s.log_sigma(static_cast<Eigen::Index>(k)), &d);
        add_grad(log_sigma_idx[k], d);
      }
    }
    if (log_nu_idx >= 0) {
      lp += positive_prior_u(nu_prior, th(log_nu_idx), &d);
      add_grad(log_nu_idx, d);
    }
    if (log_size_idx >= 0) {
      lp += positive_prior_u(size_prior, th(log_size_idx), &d);
      add_grad(log_size_idx, d);
    }
    return lp;
  }

  double eval(const Vector& th, Vector* grad) const {
    if (grad) *grad = Vector::Zero(dim);
    const double lp = log_prior(th, grad);
    if (!std::isfinite(lp)) {
      if (grad) grad->setZero();
      return kNegInf;
    }
    const double ll = log_lik(th, grad, nullptr);
    if (!std::isfinite(ll)) {
      if (grad) grad->setZero();
      return kNegInf;
    }
    return lp + ll;
  }

  double raw_scale_shift() const {
    return (meta.y_standardized && (family == Family::Gauss || family == Family::StudentT)) ? std::log(meta.y_sd)
                                                                                          : 0.0;
  }

  Vector pointwise(const Vector& th) const {
    Vector pw;
    log_lik(th, nullptr, &pw);
    return pw.array() - raw_scale_shift();
  }

  Vector derived(const Vector& th) const {
    const State s = unpack(th);
    std::vector<double> out;
    const double sy = meta.y_sd;
    const double my = meta.y_mean;
    Vector b_raw = Vector::Zero(s.b.size());
    double shift = 0.0;
    for (std::size_t j = 1; j < coef.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      b_raw(jj) = s.b(jj) * sy / meta.x_sd[j];
      shift += b_raw(jj) * meta.x_mean[j];
    }
    const double intercept_shift = my - shift;
    if (anova) {
      Vector mu_raw(n_groups);
      const double mu0_raw = separate_constant ? s.centre * sy + my : 0.0;
      for (int g = 0; g < n_groups; ++g) mu_raw(g) = s.a(g) * sy + (separate_constant ? 0.0 : my);
      if (separate_constant) out.push_back(mu0_raw);
      for (int g = 0; g < n_groups; ++g) out.push_back(mu_raw(g));
      const auto rc = anova_recenter(mu0_raw, mu_raw);
      out.push_back(rc.a0);
      for (int g = 0; g < n_groups; ++g) out.push_back(rc.a(g));
      if (group_adaptive) out.push_back(s.omega * sy);
    } else {
      if (n_groups == 0) out.push_back(s.b(0) * sy + intercept_shift);
      for (std::size_t j = 1; j < coef.size(); ++j) out.push_back(b_raw(static_cast<Eigen::Index>(j)));
      if (n_groups > 0) {
        const double constant_raw = (separate_constant ? s.centre * sy : 0.0) + intercept_shift;
        if (separate_constant) {
          out.push_back(constant_raw);
          for (int g = 0; g < n_groups; ++g) out.push_back(s.a(g) * sy);
        } else {
          for (int g = 0; g < n_groups; ++g) out.push_back(s.a(g) * sy + intercept_shift);
        }
        if (group_adaptive) {
          if (!separate_constant) out.push_back(s.centre * sy + intercept_shift);
          out.push_back(s.omega * sy);
        }
      }
    }
    for (Eigen::Index k = 0; k < s.log_sigma.size(); ++k) out.push_back(std::exp(s.log_sigma(k)) * sy);
    if (log_nu_idx >= 0) out.push_back(s.nu);
    if (adaptive_dispersion) {
      out.push_back(s.alpha);
      out.push_back(s.beta * sy * sy);
    }
    if (log_size_idx >= 0) out.push_back(s.size);
    return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
  }

  void build_derived_names() {
    auto& d = derived_names;
    if (anova) {
      if (separate_constant) d.push_back("mu0");
      for (const auto& l : group_labels) d.push_back("mu[" + l + "]");
      d.push_back("a0");
      for (const auto& l : group_labels) d.push_back("a[" + l + "]");
      if (group_adaptive) d.push_back("tau");
    } else {
      if (n_groups == 0) d.push_back("b0");
      for (std::size_t j = 1; j < coef.size(); ++j) d.push_back("b[" + col_names[j] + "]");
      if (n_groups > 0) {
        if (separate_constant) d.push_back("bconst");
        for (const auto& l : group_labels) d.push_back("b0[" + l + "]");
        if (group_adaptive) {
          if (!separate_constant) d.push_back("zeta");
          d.push_back("omega");
        }
      }
    }
    if (hetero) {
      for (const auto& l : group_labels) d.push_back("sigma[" + l + "]");
    } else if (!log_sigma_idx.empty()) {
      d.push_back("sigma");
    }
    if (log_nu_idx >= 0) d.push_back("nu");
    if (adaptive_dispersion) {
      d.push_back("alpha");
      d.push_back("beta");
    }
    if (log_size_idx >= 0) d.push_back("size");
  }

  Vector initial(Rng& rng) const {
    Vector th = Vector::Zero(dim);
    double centre_guess = 0.0;
    switch (family) {
      case Family::Gauss:
      case Family::StudentT: centre_guess = y.mean(); break;
      case Family::Binomial: {
        const double p = (y.sum() + 0.5) / (trials.sum() + 1.0);
        centre_guess = std::log(p / (1.0 - p));
        break;
      }
      case Family::Poisson:
      case Family::NegBin: centre_guess = std::log(y.mean() + 0.5); break;
      case Family::Exponential: centre_guess = -y.mean(); break;
    }
    auto jitter = [&] { return 0.1 * rng.normal(); };
    for (std::size_t j = 0; j < coef.size(); ++j) {
      const auto& c = coef[j];
      if (c.index < 0) continue;
      const double target = j == 0 ? centre_guess : 0.0;
      if (c.truncated) {
        const double gap = c.trunc.upper_bound - target;
        th(c.index) = (gap > 0.0 ? std::log(gap) : std::log(0.01)) + jitter();
      } else {
        th(c.index) = target + jitter();
      }
    }
    if (anova && !separate_constant) {
      for (int g = 0; g < n_groups; ++g) {
        double m = 0.0;
        for (int i : rows_of_group[static_cast<std::size_t>(g)]) m += y(i);
        const auto cnt = rows_of_group[static_cast<std::size_t>(g)].size();
        th(group_idx[static_cast<std::size_t>(g)]) = (cnt ? m / static_cast<double>(cnt) : centre_guess) + jitter();
      }
    } else {
      for (int g = 0; g < n_groups; ++g) {
        th(group_idx[static_cast<std::size_t>(g)]) = (separate_constant ? 0.0 : centre_guess) + jitter();
      }
    }
    if (centre_idx >= 0) th(centre_idx) = centre_guess + jitter();
    if (log_omega_idx >= 0) th(log_omega_idx) = jitter();
    double sd_guess = 0.0;
    if (family == Family::Gauss || family == Family::StudentT) {
      const double sd = sample_sd(y, y.mean());
      sd_guess = sd > 0.0 ? std::log(sd) : 0.0;
    }
    for (int idx : log_sigma_idx) th(idx) = sd_guess + jitter();
    if (log_nu_idx >= 0) th(log_nu_idx) = std::log(10.0) + jitter();
    if (log_size_idx >= 0) th(log_size_idx) = std::log(10.0) + jitter();
    if (log_alpha_idx >= 0) th(log_alpha_idx) = jitter();
    if (log_beta_idx >= 0) th(log_beta_idx) = jitter();
    return th;
  }

  double draw_response(const Vector& th, const NewCases& cases, std::size_t row, Rng& rng) const {
    const State s = unpack(th);
    const auto r = static_cast<Eigen::Index>(row);
    double eta = 0.0;
    for (std::size_t j = 0; j < coef.size(); ++j) {
      if (coef[j].index < 0) continue;
      double xv = cases.x.x(r, static_cast<Eigen::Index>(j));
      if (meta.x_standardized[j]) xv = (xv - meta.x_mean[j]) / meta.x_sd[j];
      eta += xv * s.b(static_cast<Eigen::Index>(j));
    }
    int g = -1;
    if (n_groups > 0) {
      g = cases.group[row] - 1;
      if (g >= 0) {
        eta += s.a(g);
      } else {
        eta += (separate_constant ? 0.0 : s.centre) + s.omega * rng.normal();
      }
      if (separate_constant) eta += s.centre;
    }
    if (family == Family::Poisson || family == Family::NegBin) {
      if (!cases.exposure.empty()) eta -= std::log(cases.exposure[row]);
    }
    auto sigma_for = [&]() {
      if (!hetero) return std::exp(s.log_sigma(0));
      if (g >= 0) return std::exp(s.log_sigma(g));
      return std::sqrt(draw(InverseGamma{s.alpha, s.beta}, rng));
    };
    switch (family) {
      case Family::Gauss: return meta.y_mean + meta.y_sd * (eta + sigma_for() * rng.normal());
      case Family::StudentT: {
        const double sig = sigma_for();
        return meta.y_mean + meta.y_sd * (eta + sig * draw(NoncentralT{0.0, 1.0, s.nu}, rng));
      }
      case Family::Binomial: {
        const std::int64_t m = cases.trials.empty() ? 1 : cases.trials[row];
        return draw(Binomial{m, logistic(eta)}, rng);
      }
      case Family::Poisson: return draw(Poisson{std::exp(eta)}, rng);
      case Family::NegBin: {
        const double mu = std::exp(eta);
        return draw(NegativeBinomial{s.size, s.size / (s.size + mu)}, rng);
      }
      case Family::Exponential: return draw(dist::Exponential{apply_inverse_link(Link::NegativeInverse, eta)}, rng);
    }
    return 0.0;
  }

  void check_cases(const NewCases& cases) const {
    if (cases.rows() == 0) throw DimensionError("no new cases");
    if (cases.x.columns() != coef.size()) {
      throw DimensionError(
          fmt::format("new cases have {} design columns, the model has {}", cases.x.columns(), coef.size()));
    }
    if (!cases.x.x.allFinite()) throw DomainError("new cases have non-finite entries");
    if (n_groups > 0) {
      if (cases.group.size() != cases.rows()) throw DimensionError("new cases need one group index per row");
      for (int g : cases.group) {
        if (g < 0 || g > n_groups) throw DimensionError(fmt::format("group index {} outside [0, {}]", g, n_groups));
        if (g == 0 && !group_adaptive) throw DimensionError("an unseen group needs an adaptive group prior");
        if (g == 0 && hetero && !adaptive_dispersion) {
          throw DimensionError("an unseen group needs an adaptive dispersion prior");
        }
      }
    } else if (!cases.group.empty()) {
      throw DimensionError("the model has no groups");
    }
    if (!cases.trials.empty()) {
      if (cases.trials.size() != cases.rows()) throw DimensionError("one trial count per new case");
      for (auto t : cases.trials) {
        if (t < 0) throw DomainError("negative trial count");
      }
    }
    if (!cases.exposure.empty()) {
      if (cases.exposure.size() != cases.rows()) throw DimensionError("one exposure per new case");
      for (double e : cases.exposure) {
        if (!(e > 0.0) || !std::isfinite(e)) throw DomainError("exposure must be positive");
      }
    }
  }
};

// Gibbs updates for Gauss likelihoods with conjugate-form priors.
std::vector<std::function<double(const Vector&, Rng&)>> gauss_conditionals(const std::shared_ptr<const Model>& mp) {
  const Model& m = *mp;
  if (m.family != Family::Gauss || m.adaptive_dispersion) return {};
  const auto sig_ig = inverse_gamma_form(m.sigma_prior);
  if (!sig_ig) return {};
  for (const auto& c : m.coef) {
    if (c.index >= 0 && (c.truncated || !c.prior.is<Gauss>())) return {};
  }
  std::optional<std::pair<double, double>> omega_ig;
  if (m.n_groups > 0) {
    if (m.group_adaptive) {
      omega_ig = inverse_gamma_form(m.omega_prior);
      if (!omega_ig || !m.centre_prior.is<Gauss>()) return {};
    } else if (!m.group_fixed_prior.is<Gauss>()) {
      return {};
    }
  }

  std::vector<std::function<double(const Vector&, Rng&)>> out(static_cast<std::size_t>(m.dim));
  auto inv_var_of_row = [mp](const Model::State& s, std::size_t i) {
    return std::exp(-2.0 * s.log_sigma(mp->slot_of_row(i)));
  };

  for (std::size_t j = 0; j < m.coef.size(); ++j) {
    if (m.coef[j].index < 0) continue;
    out[static_cast<std::size_t>(m.coef[j].index)] = [mp, j, inv_var_of_row](const Vector& th, Rng& rng) {
      const Model& md = *mp;
      const auto s = md.unpack(th);
      const Vector e = md.eta(s);
      const auto jj = static_cast<Eigen::Index>(j);
      const auto& pr = md.coef[j].prior.as<Gauss>();
      double prec = 1.0 / (pr.sigma * pr.sigma);
      double num = pr.mu * prec;
      for (std::size_t i = 0; i < md.n(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double x = md.z(ii, jj);
        const double w = inv_var_of_row(s, i);
        prec += x * x * w;
        num += x * (md.y(ii) - (e(ii) - x * s.b(jj))) * w;
      }
      return num / prec + rng.normal() / std::sqrt(prec);
    };
  }

  for (int g = 0; g < m.n_groups; ++g) {
    out[static_cast<std::size_t>(m.group_idx[static_cast<std::size_t>(g)])] = [mp, g, inv_var_of_row](const Vector& th,
                                                                                                         Rng& rng) {
      const Model& md = *mp;
      const auto s = md.unpack(th);
      const Vector e = md.eta(s);
      double prior_mean, prior_var;
      if (md.group_adaptive) {
        prior_mean = md.separate_constant ? 0.0 : s.centre;
        prior_var = s.omega * s.omega;
      } else {
        const auto& pr = md.group_fixed_prior.as<Gauss>();
        prior_mean = pr.mu;
        prior_var = pr.sigma * pr.sigma;
      }
      double prec = 1.0 / prior_var;
      double num = prior_mean / prior_var;
      for (int i : md.rows_of_group[static_cast<std::size_t>(g)]) {
        const double w = inv_var_of_row(s, static_cast<std::size_t>(i));
        prec += w;
        num += (md.y(i) - (e(i) - s.a(g))) * w;
      }
      return num / prec + rng.normal() / std::sqrt(prec);
    };
  }

  if (m.group_adaptive) {
    if (m.separate_constant) {
      out[static_cast<std::size_t>(m.centre_idx)] = [mp, inv_var_of_row](const Vector& th, Rng& rng) {
        const Model& md = *mp;
        const auto s = md.unpack(th);
        const Vector e = md.eta(s);
        const auto& pr = md.centre_prior.as<Gauss>();
        double prec = 1.0 / (pr.sigma * pr.sigma);
        double num = pr.mu * prec;
        for (std::size_t i = 0; i < md.n(); ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          const double w = inv_var_of_row(s, i);
          prec += w;
          num += (md.y(ii) - (e(ii) - s.centre)) * w;
        }
        return num / prec + rng.normal() / std::sqrt(prec);
      };
    } else {
      out[static_cast<std::size_t>(m.centre_idx)] = [mp](const Vector& th, Rng& rng) {
        const Model& md = *mp;
        const auto s = md.unpack(th);
        const auto& pr = md.centre_prior.as<Gauss>();
        const double w = 1.0 / (s.omega * s.omega);
        const double prec = md.n_groups * w + 1.0 / (pr.sigma * pr.sigma);
        const double num = s.a.sum() * w + pr.mu / (pr.sigma * pr.sigma);
        return num / prec + rng.normal() / std::sqrt(prec);
      };
    }
    const auto [oa, ob] = *omega_ig;
    out[static_cast<std::size_t>(m.log_omega_idx)] = [mp, oa = oa, ob = ob](const Vector& th, Rng& rng) {
      const Model& md = *mp;
      const auto s = md.unpack(th);
      const double centre = md.separate_constant ? 0.0 : s.centre;
      const double ss = (s.a.array() - centre).square().sum();
      return 0.5 * std::log(draw(InverseGamma{oa + 0.5 * md.n_groups, ob + 0.5 * ss}, rng));
    };
  }

  const auto [sa, sb] = *sig_ig;
  for (std::size_t k = 0; k < m.log_sigma_idx.size(); ++k) {
    out[static_cast<std::size_t>(m.log_sigma_idx[k])] = [mp, k, sa = sa, sb = sb](const Vector& th, Rng& rng) {
      const Model& md = *mp;
      const auto s = md.unpack(th);
      const Vector e = md.eta(s);
      double ss = 0.0;
      double count = 0.0;
      for (std::size_t i = 0; i < md.n(); ++i) {
        if (static_cast<std::size_t>(md.slot_of_row(i)) != k) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        const double r = md.y(ii) - e(ii);
        ss += r * r;
        count += 1.0;
      }
      return 0.5 * std::log(draw(InverseGamma{sa + 0.5 * count, sb + 0.5 * ss}, rng));
    };
  }
  return out;
}

}  // namespace detail

// compile -------------------------------------------------------------------

namespace {

using detail::Family;
using detail::Model;

Family family_of(const Likelihood& lik) {
  switch (lik.index()) {
    case 0: return Family::Gauss;
    case 1: return Family::StudentT;
    case 2:
    case 3: return Family::Binomial;
    case 4: return Family::Poisson;
    case 5: return Family::Exponential;
    case 6: return std::get<AnovaCellMeansLik>(lik).heteroscedastic ? Family::StudentT : Family::Gauss;
    default: return Family::NegBin;
  }
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

void check_response(Family fam, const Vector& y, const Vector& trials) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (!std::isfinite(v)) throw DomainError(fmt::format("response row {} is not finite", i + 1));
    switch (fam) {
      case Family::Binomial:
        if (!is_integer(v) || v < 0.0 || v > trials(i)) {
          throw DomainError(fmt::format("response row {} = {} is not a count in [0, {}]", i + 1, v, trials(i)));
        }
        break;
      case Family::Poisson:
      case Family::NegBin:
        if (!is_integer(v) || v < 0.0) {
          throw DomainError(fmt::format("response row {} = {} is not a non-negative count", i + 1, v));
        }
        break;
      case Family::Exponential:
        if (v < 0.0) throw DomainError(fmt::format("response row {} = {} is negative", i + 1, v));
        break;
      default: break;
    }
  }
}

detail::CoefSlot make_slot(const PriorSpec& p) {
  detail::CoefSlot s;
  if (const auto* f = std::get_if<Fixed>(&p)) {
    s.prior = f->d;
  } else {
    const auto& t = std::get<TruncatedGauss>(p);
    s.truncated = true;
    s.trunc = t;
    s.log_trunc_mass = std::log(std_normal_cdf((t.upper_bound - t.mu0) / t.sigma0));
  }
  return s;
}

}  // namespace

CompiledModel compile(const ModelSpec& spec, const Vector& y, const DesignMatrix& x,
                      const std::optional<Groups>& groups) {
  spec.validate();
  x.validate();
  if (static_cast<std::size_t>(y.size()) != x.rows()) {
    throw DimensionError(fmt::format("{} responses for {} design rows", y.size(), x.rows()));
  }
  if (y.size() == 0) throw EmptyDataError("no observations");
  if (groups) groups->validate(x.rows());

  auto m = std::make_shared<Model>();
  m->family = family_of(spec.likelihood);
  const auto* anova_lik = std::get_if<AnovaCellMeansLik>(&spec.likelihood);
  m->anova = anova_lik != nullptr;
  const bool hetero_gauss = std::holds_alternative<GaussLik>(spec.likelihood) &&
                            !std::get<GaussLik>(spec.likelihood).homoscedastic;
  const std::size_t n = x.rows();
  const std::size_t k1 = x.columns();

  if (m->anova) {
    if (!groups) throw SpecError("group: the anova likelihood needs a group column");
    if (k1 != 1) throw SpecError("predictors: the anova likelihood takes no predictors");
  }
  if (hetero_gauss && !groups) throw SpecError("group: a heteroscedastic gauss likelihood needs a group column");
  if (m->family == Family::Exponential && groups) throw SpecError("group: groups are not supported for exponential");
  if (spec.group_prior && !groups) throw SpecError("priors: a group prior was given but there is no group column");

  m->trials = Vector::Ones(static_cast<Eigen::Index>(n));
  if (const auto* b = std::get_if<BinomialLik>(&spec.likelihood); b && !b->trials.empty()) {
    if (b->trials.size() != n) throw DimensionError(fmt::format("{} trial counts for {} rows", b->trials.size(), n));
    for (std::size_t i = 0; i < n; ++i) {
      if (b->trials[i] < 0) throw DomainError("trial counts must be non-negative");
      m->trials(static_cast<Eigen::Index>(i)) = static_cast<double>(b->trials[i]);
    }
  }
  m->offset = Vector::Zero(static_cast<Eigen::Index>(n));
  if (const auto* p = std::get_if<PoissonLik>(&spec.likelihood); p && !p->exposure.empty()) {
    if (p->exposure.size() != n) throw DimensionError(fmt::format("{} exposures for {} rows", p->exposure.size(), n));
    for (std::size_t i = 0; i < n; ++i) {
      if (!(p->exposure[i] > 0.0) || !std::isfinite(p->exposure[i])) throw DomainError("exposure must be positive");
      m->offset(static_cast<Eigen::Index>(i)) = -std::log(p->exposure[i]);
    }
  }
  check_response(m->family, y, m->trials);

  const bool metric = m->family == Family::Gauss || m->family == Family::StudentT;
  const bool homo_anova = m->anova && !anova_lik->heteroscedastic;
  const bool do_x = spec.standardize && m->family != Family::Exponential && !m->anova;
  const bool do_y = spec.standardize && metric && !homo_anova;
  if (do_x || do_y) {
    auto st = standardize(y, x, do_y);
    if (!do_x) {
      st.zx = x;
      const bool ys = st.meta.y_standardized;
      const double ym = st.meta.y_mean, ysd = st.meta.y_sd;
      st.meta = Standardization::identity(k1);
      st.meta.y_standardized = ys;
      st.meta.y_mean = ym;
      st.meta.y_sd = ysd;
    }
    m->meta = st.meta;
    m->z = st.zx.x;
    m->y = st.zy;
  } else {
    m->meta = Standardization::identity(k1);
    m->z = x.x;
    m->y = y;
  }
  m->y_raw = y;
  m->col_names = x.names;
  if (m->family == Family::Binomial) {
    m->log_choose_trials.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      m->log_choose_trials(ii) = log_choose(m->trials(ii), y(ii));
    }
  }
  if (m->family == Family::Poisson || m->family == Family::NegBin) {
    m->log_fact_y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) m->log_fact_y(static_cast<Eigen::Index>(i)) = log_factorial(y(static_cast<Eigen::Index>(i)));
  }

  if (groups) {
    m->n_groups = groups->n_groups;
    m->group_labels = groups->labels;
    m->grp.resize(n);
    m->rows_of_group.assign(static_cast<std::size_t>(m->n_groups), {});
    for (std::size_t i = 0; i < n; ++i) {
      m->grp[i] = groups->index[i] - 1;
      m->rows_of_group[static_cast<std::size_t>(m->grp[i])].push_back(static_cast<int>(i));
    }
  }

  const bool z_names = m->meta.y_standardized ||
                       std::any_of(m->meta.x_standardized.begin(), m->meta.x_standardized.end(), [](bool b) { return b; });
  const std::string zp = z_names ? "z" : "";
  auto& names = m->names;
  auto add = [&](const std::string& name) {
    names.push_back(name);
    return static_cast<int>(names.size()) - 1;
  };

  // Coefficient priors.
  const bool scaled = do_x || do_y;
  PriorSpec default_intercept = Fixed{Gauss{0.0, scaled ? 1.0 : 10.0}};
  PriorSpec default_slope = default_intercept;
  if (m->family == Family::Exponential) {
    default_intercept = TruncatedGauss{0.0, 10.0, 0.0};
    default_slope = TruncatedGauss{0.0, 10.0, 0.0};
  }
  const PriorSpec intercept_prior = spec.intercept_prior.value_or(default_intercept);
  if (!spec.slope_priors.empty() && spec.slope_priors.size() != 1 && spec.slope_priors.size() != k1 - 1) {
    throw SpecError(fmt::format("priors: {} slope priors for {} predictors", spec.slope_priors.size(), k1 - 1));
  }
  m->coef.resize(k1);
  for (std::size_t j = 1; j < k1; ++j) {
    const PriorSpec& p = spec.slope_priors.empty()        ? default_slope
                         : spec.slope_priors.size() == 1 ? spec.slope_priors[0]
                                                         : spec.slope_priors[j - 1];
    m->coef[j] = make_slot(p);
  }

  if (m->anova) {
    if (anova_lik->heteroscedastic) {
      m->separate_constant = true;
      m->group_adaptive = true;
      m->centre_prior = std::get<Fixed>(spec.intercept_prior.value_or(Fixed{Gauss{0.0, 1.0}})).d;
      m->centre_idx = add(zp + "mu0");
      for (const auto& l : m->group_labels) m->group_idx.push_back(add(zp + "mu[" + l + "]"));
      if (spec.group_prior) {
        const auto* a = std::get_if<Adaptive>(&*spec.group_prior);
        if (!a) throw SpecError("priors: the heteroscedastic anova takes an adaptive group prior");
        m->omega_prior = a->scale;
      }
      m->log_omega_idx = add("log_" + zp + "tau");
    } else {
      m->group_fixed_prior = Gauss{0.0, 100.0};
      if (spec.group_prior) {
        const auto* f = std::get_if<Fixed>(&*spec.group_prior);
        if (!f) throw SpecError("priors: the homoscedastic anova takes a fixed cell prior");
        m->group_fixed_prior = f->d;
      }
      for (const auto& l : m->group_labels) m->group_idx.push_back(add(zp + "mu[" + l + "]"));
    }
  } else {
    if (!groups) {
      if (std::holds_alternative<Adaptive>(intercept_prior)) throw SpecError("priors: intercept cannot be adaptive");
      m->coef[0] = make_slot(intercept_prior);
      m->coef[0].index = add(zp + "b0");
    }
    for (std::size_t j = 1; j < k1; ++j) {
      m->coef[j].index = add(m->coef[j].truncated ? "log_gap_b[" + x.names[j] + "]" : zp + "b[" + x.names[j] + "]");
    }
    if (!groups && m->coef[0].truncated) names[static_cast<std::size_t>(m->coef[0].index)] = "log_gap_b0";
    if (groups) {
      const PriorSpec gp = spec.group_prior.value_or(Adaptive{});
      if (const auto* a = std::get_if<Adaptive>(&gp)) {
        m->group_adaptive = true;
        m->separate_constant =
            a->centring == Adaptive::Centring::SeparateConstant ||
            (a->centring == Adaptive::Centring::Auto &&
             (m->family == Family::Poisson || m->family == Family::NegBin));
        m->centre_prior = a->location;
        m->omega_prior = a->scale;
        if (m->separate_constant) {
          if (spec.intercept_prior) m->centre_prior = std::get<Fixed>(*spec.intercept_prior).d;
          m->centre_idx = add(zp + "bconst");
        }
        for (const auto& l : m->group_labels) m->group_idx.push_back(add(zp + "b0[" + l + "]"));
        if (!m->separate_constant) m->centre_idx = add("zeta");
        m->log_omega_idx = add("log_" + zp + "omega");
      } else {
        m->group_fixed_prior = std::get<Fixed>(gp).d;
        for (const auto& l : m->group_labels) m->group_idx.push_back(add(zp + "b0[" + l + "]"));
      }
    }
  }
  if (spec.intercept_prior && groups && std::holds_alternative<TruncatedGauss>(*spec.intercept_prior)) {
    throw SpecError("priors: a truncated intercept prior is not available with groups");
  }

  // Dispersion and shape parameters.
  m->sigma_prior = spec.dispersion_prior.value_or(PositivePrior{InverseGamma{0.01, 0.01}, PriorOn::Variance});
  const std::string sig = "log_" + zp + "sigma";
  if (metric) {
    m->hetero = hetero_gauss || (m->anova && anova_lik->heteroscedastic);
    if (m->hetero) {
      for (const auto& l : m->group_labels) m->log_sigma_idx.push_back(add(sig + "[" + l + "]"));
    } else {
      m->log_sigma_idx.push_back(add(sig));
    }
  }
  if (const auto* t = std::get_if<StudentTLik>(&spec.likelihood)) {
    m->nu_prior = t->nu_prior;
    m->log_nu_idx = add("log_nu_minus_2");
  }
  if (m->anova && anova_lik->heteroscedastic) {
    m->nu_prior = anova_lik->nu_prior;
    m->log_nu_idx = add("log_nu_minus_2");
    m->adaptive_dispersion = !spec.dispersion_prior.has_value();
    m->shape_rate_prior = anova_lik->shape_rate_prior;
    if (m->adaptive_dispersion) {
      m->log_alpha_idx = add("log_alpha");
      m->log_beta_idx = add("log_beta");
    }
  }
  if (const auto* nb = std::get_if<NegativeBinomialLik>(&spec.likelihood)) {
    m->size_prior = nb->size_prior;
    m->log_size_idx = add("log_size");
  }
  m->dim = static_cast<int>(names.size());
  m->build_derived_names();

  CompiledModel out;
  std::shared_ptr<const Model> cm = m;
  out.impl_ = cm;
  auto& t = out.target_;
  t.param_names = m->names;
  t.log_density = [cm](const Vector& th) { return cm->eval(th, nullptr); };
  t.gradient = [cm](const Vector& th) {
    Vector g;
    cm->eval(th, &g);
    return g;
  };
  t.full_conditionals = detail::gauss_conditionals(cm);
  t.initial = [cm](Rng& rng) { return cm->initial(rng); };
  return out;
}

// CompiledModel -------------------------------------------------------------

const mcmc::LogTarget& CompiledModel::target() const { return target_; }
const Standardization& CompiledModel::meta() const { return impl_->meta; }
const std::vector<std::string>& CompiledModel::param_names() const { return impl_->names; }
std::size_t CompiledModel::n_obs() const { return impl_->n(); }
bool CompiledModel::has_full_conditionals() const { return !target_.full_conditionals.empty(); }

namespace {
void check_theta(const Vector& theta, int dim) {
  if (theta.size() != dim) throw DimensionError(fmt::format("theta has {} entries, the model has {}", theta.size(), dim));
}
}  // namespace

double CompiledModel::log_prior(const Vector& theta) const {
  check_theta(theta, impl_->dim);
  return impl_->log_prior(theta, nullptr);
}

double CompiledModel::log_likelihood(const Vector& theta) const { return pointwise_log_lik(theta).sum(); }

Vector CompiledModel::pointwise_log_lik(const Vector& theta) const {
  check_theta(theta, impl_->dim);
  return impl_->pointwise(theta);
}

const std::vector<std::string>& CompiledModel::derived_names() const { return impl_->derived_names; }

Vector CompiledModel::derived(const Vector& theta) const {
  check_theta(theta, impl_->dim);
  return impl_->derived(theta);
}

double CompiledModel::draw_response(const Vector& theta, const NewCases& cases, std::size_t row, Rng& rng) const {
  check_theta(theta, impl_->dim);
  if (row >= cases.rows()) throw DimensionError(fmt::format("row {} outside {} new cases", row, cases.rows()));
  return impl_->draw_response(theta, cases, row, rng);
}

void CompiledModel::check_cases(const NewCases& cases) const { impl_->check_cases(cases); }

}  // namespace bayescore::glm
