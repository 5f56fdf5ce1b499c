#include "bayescore/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>

#include "bayescore/json_io.hpp"

namespace bayescore::evidence {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> resolve_measure(const std::vector<double>& measure, std::size_t k) {
  if (measure.empty()) return std::vector<double>(k, 1.0);
  if (measure.size() != k) throw DimensionError(fmt::format("{} measure weights for {} points", measure.size(), k));
  for (double m : measure) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ParameterError("measure weights must be positive and finite");
  }
  return measure;
}

}  // namespace

double shannon_entropy(const prob::DiscretePrior& p, const std::vector<double>& measure) {
  const auto m = resolve_measure(measure, p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s -= p[i] * std::log(p[i] / m[i]);
  }
  return s;
}

MaxEntSolution maxent_solve(const MaxEntProblem& problem, double tol, std::size_t max_iter) {
  const std::size_t k = problem.support.size();
  if (k == 0) throw EmptyDataError("maximum entropy over an empty support");
  if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
  const auto m = resolve_measure(problem.measure, k);
  const std::size_t l = problem.constraints.size();
  Eigen::MatrixXd c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  Vector target(static_cast<Eigen::Index>(l));
  for (std::size_t j = 0; j < l; ++j) {
    const auto& con = problem.constraints[j];
    if (con.values.size() != k) {
      throw DimensionError(fmt::format("constraint {} has {} values for {} support points", j + 1, con.values.size(), k));
    }
    const auto [lo, hi] = std::minmax_element(con.values.begin(), con.values.end());
    if (con.target < *lo || con.target > *hi) {
      throw InfeasibleError(fmt::format("constraint {} target {} outside the reachable range [{}, {}]", j + 1,
                                        con.target, *lo, *hi));
    }
    for (std::size_t i = 0; i < k; ++i) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = con.values[i];
    target(static_cast<Eigen::Index>(j)) = con.target;
  }
  Vector log_m(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) log_m(static_cast<Eigen::Index>(i)) = std::log(m[i]);

  // Dual objective ln Z(lambda) + lambda . target, with p the induced distribution.
  auto evaluate = [&](const Vector& lambda, Vector& p) {
    const Vector logw = log_m - c * lambda;
    const double mx = logw.maxCoeff();
    p = (logw.array() - mx).exp();
    const double z = p.sum();
    p /= z;
    return mx + std::log(z) + lambda.dot(target);
  };

  Vector lambda = Vector::Zero(static_cast<Eigen::Index>(l));
  Vector p;
  double phi = evaluate(lambda, p);
  std::size_t it = 0;
  double resid = l ? (c.transpose() * p - target).cwiseAbs().maxCoeff() : 0.0;
  while (resid >= tol) {
    if (it == max_iter) {
      throw ToleranceError(fmt::format("maximum entropy residual {} after {} Newton steps", resid, it));
    }
    const Vector mean = c.transpose() * p;
    const Vector grad = target - mean;
    const Eigen::MatrixXd centred = c.rowwise() - mean.transpose();
    const Eigen::MatrixXd hess = centred.transpose() * p.asDiagonal() * centred;
    const Vector step = -hess.completeOrthogonalDecomposition().solve(grad);
    double t = 1.0;
    Vector trial_p;
    double trial = evaluate(lambda + step, trial_p);
    while (!(trial <= phi + 1e-4 * t * grad.dot(step)) && t > 1e-12) {
      t *= 0.5;
      trial = evaluate(lambda + t * step, trial_p);
    }
    if (t <= 1e-12) {
      if (resid < std::sqrt(tol)) break;
      throw InfeasibleError("maximum entropy dual made no progress");
    }
    lambda += t * step;
    if (!lambda.allFinite() || lambda.cwiseAbs().maxCoeff() > 1e12) {
      throw InfeasibleError("maximum entropy dual diverged");
    }
    phi = trial;
    p = trial_p;
    resid = (c.transpose() * p - target).cwiseAbs().maxCoeff();
    ++it;
  }
  if (resid >= tol) throw ToleranceError(fmt::format("maximum entropy residual {} above {}", resid, tol));
  const Vector logw = log_m - c * lambda;
  const double mx = logw.maxCoeff();
  const double log_z = mx + std::log((logw.array() - mx).exp().sum());
  std::vector<double> probs(p.data(), p.data() + p.size());
  return {prob::DiscretePrior::from_weights(probs), lambda, log_z - 1.0, it, resid};
}

double kl_divergence(const prob::DiscretePrior& p, const prob::DiscretePrior& q) {
  if (p.size() != q.size()) throw DimensionError(fmt::format("supports of size {} and {}", p.size(), q.size()));
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw SupportError(fmt::format("q vanishes at point {} where p is positive", i + 1));
    d += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(d, 0.0);
}

double deviance(const std::vector<double>& log_liks) {
  return -2.0 * prob::stable_sum(log_liks);
}

double bayes_factor(const ModelEvidence& i, const ModelEvidence& j) {
  return std::exp(i.log_average_likelihood - j.log_average_likelihood);
}

ModelEvidence beta_binomial_evidence(double a, double b, std::int64_t y, std::int64_t n) {
  if (!(a > 0.0) || !(b > 0.0)) throw ParameterError("beta hyperparameters must be positive");
  if (y < 0 || n < y) throw DomainError(fmt::format("need 0 <= y <= n, got y={} n={}", y, n));
  const auto yd = static_cast<double>(y), nd = static_cast<double>(n);
  return {dist::log_beta_fn(a + yd, b + nd - yd) - dist::log_beta_fn(a, b), ModelEvidence::Method::ClosedForm};
}

double bayes_factor_beta_binomial(double a1, double b1, double a2, double b2, std::int64_t y, std::int64_t n) {
  return bayes_factor(beta_binomial_evidence(a1, b1, y, n), beta_binomial_evidence(a2, b2, y, n));
}

JeffreysBand jeffreys_classify(double b12) {
  if (!(b12 > 0.0)) throw DomainError(fmt::format("Bayes factor must be positive, got {}", b12));
  if (b12 > 1.0) return JeffreysBand::Supported;
  if (b12 > std::pow(10.0, -0.5)) return JeffreysBand::WeakAgainst;
  if (b12 > 0.1) return JeffreysBand::SubstantialAgainst;
  if (b12 > std::pow(10.0, -1.5)) return JeffreysBand::StrongAgainst;
  if (b12 > 0.01) return JeffreysBand::VeryStrongAgainst;
  return JeffreysBand::DecisiveAgainst;
}

std::string to_string(JeffreysBand band) {
  switch (band) {
    case JeffreysBand::Supported: return "supported";
    case JeffreysBand::WeakAgainst: return "weak-against";
    case JeffreysBand::SubstantialAgainst: return "substantial-against";
    case JeffreysBand::StrongAgainst: return "strong-against";
    case JeffreysBand::VeryStrongAgainst: return "very-strong-against";
    case JeffreysBand::DecisiveAgainst: return "decisive-against";
  }
  return "?";
}

namespace {

constexpr double kTailMass = 5e-11;
constexpr double kPeakWindow = 40.0;

struct Axis {
  double lo;
  double hi;
  dist::Distribution marginal;
  bool discrete;
};

Axis make_axis(const dist::Distribution& marginal) {
  const auto s = dist::support(marginal);
  Axis a{s.lo, s.hi, marginal, marginal.is_discrete()};
  if (!std::isfinite(a.lo)) a.lo = dist::quantile(marginal, kTailMass);
  if (!std::isfinite(a.hi)) a.hi = dist::quantile(marginal, 1.0 - kTailMass);
  if (a.discrete) {
    a.lo = std::max(a.lo, dist::quantile(marginal, kTailMass) - 1.0);
    a.hi = std::min(a.hi, dist::quantile(marginal, 1.0 - kTailMass));
  }
  return a;
}

// Pilot abscissae: equal prior-mass points merged with an even grid over the box.
std::vector<double> pilot_points(const Axis& a, std::size_t grid) {
  std::vector<double> pts;
  if (a.discrete) {
    for (double v = std::ceil(a.lo); v <= a.hi; v += 1.0) pts.push_back(v);
    return pts;
  }
  for (std::size_t i = 0; i < grid; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    pts.push_back(a.lo + (a.hi - a.lo) * u);
    const double q = dist::quantile(a.marginal, kTailMass + (1.0 - 2.0 * kTailMass) * u);
    if (q > a.lo && q < a.hi) pts.push_back(q);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// Sub-intervals of [lo, hi] separating the region where the pilot values are near the peak.
std::vector<double> breakpoints(const Axis& a, const std::vector<double>& pts, const std::vector<double>& best,
                                double peak) {
  std::size_t first = pts.size(), last = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (best[i] > peak - kPeakWindow) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }
  std::vector<double> b{a.lo};
  if (first < pts.size()) {
    const double l = first > 0 ? pts[first - 1] : a.lo;
    const double r = last + 1 < pts.size() ? pts[last + 1] : a.hi;
    if (l > a.lo) b.push_back(l);
    if (r < a.hi && r > b.back()) b.push_back(r);
  }
  b.push_back(a.hi);
  // Prior quantile cuts keep heavy-tailed pieces short relative to their mass.
  for (double u : {1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.5, 0.9, 1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-6, 1.0 - 1e-8}) {
    const double q = dist::quantile(a.marginal, u);
    if (q > a.lo && q < a.hi) b.push_back(q);
  }
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& cuts) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    total += integrator.integrate(f, cuts[i], cuts[i + 1], 1e-13);
  }
  return total;
}

double sum_discrete(const std::function<double(double)>& f, const Axis& a) {
  double total = 0.0;
  for (double v = std::ceil(a.lo); v <= a.hi; v += 1.0) total += f(v);
  return total;
}

ModelEvidence quadrature(const LogLikelihood& log_lik, const std::vector<Axis>& axes,
                         const std::function<double(const Vector&)>& log_prior, std::size_t grid) {
  if (grid < 3) throw ParameterError("quadrature pilot grid needs at least 3 points");
  auto log_integrand = [&](const Vector& th) {
    const double lp = log_prior(th);
    if (!std::isfinite(lp)) return kNegInf;
    const double ll = log_lik(th);
    return std::isnan(ll) ? kNegInf : lp + ll;
  };
  if (axes.size() == 1) {
    const Axis& a = axes[0];
    const auto pts = pilot_points(a, grid);
    std::vector<double> vals(pts.size());
    Vector th(1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      th(0) = pts[i];
      vals[i] = log_integrand(th);
    }
    const double peak = *std::max_element(vals.begin(), vals.end());
    if (!std::isfinite(peak)) throw DegenerateError("likelihood vanishes across the prior range");
    auto f = [&](double x) {
      Vector t(1);
      t(0) = x;
      const double v = log_integrand(t);
      return std::isfinite(v) ? std::exp(v - peak) : 0.0;
    };
    const double integral = a.discrete ? sum_discrete(f, a) : integrate_pieces(f, breakpoints(a, pts, vals, peak));
    return {peak + std::log(integral), ModelEvidence::Method::Quadrature};
  }

  const Axis& a1 = axes[0];
  const Axis& a2 = axes[1];
  const std::size_t g2 = std::min<std::size_t>(grid, 201);
  const auto p1 = pilot_points(a1, g2), p2 = pilot_points(a2, g2);
  std::vector<double> best1(p1.size(), kNegInf), best2(p2.size(), kNegInf);
  Vector th(2);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::size_t j = 0; j < p2.size(); ++j) {
      th << p1[i], p2[j];
      const double v = log_integrand(th);
      best1[i] = std::max(best1[i], v);
      best2[j] = std::max(best2[j], v);
    }
  }
  const double peak = *std::max_element(best1.begin(), best1.end());
  if (!std::isfinite(peak)) throw DegenerateError("likelihood vanishes across the prior range");
  const auto cuts1 = breakpoints(a1, p1, best1, peak);
  const auto cuts2 = breakpoints(a2, p2, best2, peak);
  auto inner = [&](double x1) {
    auto f = [&](double x2) {
      Vector t(2);
      t << x1, x2;
      const double v = log_integrand(t);
      return std::isfinite(v) ? std::exp(v - peak) : 0.0;
    };
    return a2.discrete ? sum_discrete(f, a2) : integrate_pieces(f, cuts2);
  };
  const double integral = a1.discrete ? sum_discrete(inner, a1) : integrate_pieces(inner, cuts1);
  return {peak + std::log(integral), ModelEvidence::Method::Quadrature};
}

}  // namespace

ModelEvidence evidence_quadrature(const LogLikelihood& log_lik, const dist::Distribution& prior, std::size_t grid) {
  const std::size_t dim = prior.dimension();
  if (dim > 2) throw DimensionError(fmt::format("quadrature handles at most 2 parameters, got {}", dim));
  if (dim == 1) {
    return quadrature(log_lik, {make_axis(prior)},
                      [&](const Vector& th) { return dist::log_density_or_neg_inf(prior, th(0)); }, grid);
  }
  std::vector<Axis> axes;
  for (Eigen::Index k = 0; k < 2; ++k) {
    if (prior.is<dist::MultivariateGauss>()) {
      const auto& g = prior.as<dist::MultivariateGauss>();
      axes.push_back(make_axis(dist::Gauss{g.mu(k), std::sqrt(g.cov(k, k))}));
    } else {
      const auto& t = prior.as<dist::MultivariateT>();
      axes.push_back(make_axis(dist::NoncentralT{t.mu(k), std::sqrt(t.scale(k, k)), t.nu}));
    }
  }
  return quadrature(log_lik, axes, [&](const Vector& th) { return dist::log_density(prior, th); }, grid);
}

ModelEvidence evidence_quadrature(const LogLikelihood& log_lik, const std::vector<dist::Distribution>& priors,
                                  std::size_t grid) {
  if (priors.empty() || priors.size() > 2) {
    throw DimensionError(fmt::format("quadrature handles 1 or 2 parameters, got {}", priors.size()));
  }
  std::vector<Axis> axes;
  for (const auto& p : priors) {
    if (p.is_multivariate()) throw DimensionError("independent priors must be univariate");
    axes.push_back(make_axis(p));
  }
  return quadrature(
      log_lik, axes,
      [&](const Vector& th) {
        double s = 0.0;
        for (std::size_t k = 0; k < priors.size(); ++k) {
          s += dist::log_density_or_neg_inf(priors[k], th(static_cast<Eigen::Index>(k)));
        }
        return s;
      },
      grid);
}

DicResult dic(const mcmc::ChainSet& chains, const LogLikelihood& total_log_lik) {
  const Eigen::MatrixXd all = chains.pooled();
  if (all.rows() == 0) throw EmptyDataError("DIC needs posterior draws");
  double sum = 0.0;
  for (Eigen::Index r = 0; r < all.rows(); ++r) sum += -2.0 * total_log_lik(all.row(r).transpose());
  const double mean_dev = sum / static_cast<double>(all.rows());
  const Vector theta_bar = all.colwise().mean().transpose();
  const double dev_bar = -2.0 * total_log_lik(theta_bar);
  const double p = mean_dev - dev_bar;
  return {mean_dev + p, p, mean_dev, dev_bar};
}

WaicResult waic(const Eigen::MatrixXd& pointwise) {
  if (pointwise.rows() == 0 || pointwise.cols() == 0) throw EmptyDataError("WAIC needs draws and observations");
  const auto s = static_cast<double>(pointwise.rows());
  const Eigen::Index n = pointwise.cols();
  WaicResult out{0.0, 0.0, 0.0, 0.0, Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto col = pointwise.col(i);
    const double mx = col.maxCoeff();
    const double lppd_i = mx + std::log((col.array() - mx).exp().sum() / s);
    const double mean_log = col.mean();
    const double p_i = std::max(0.0, 2.0 * (lppd_i - mean_log));
    out.lppd += lppd_i;
    out.p_waic += p_i;
    out.pointwise(i) = -2.0 * lppd_i + 2.0 * p_i;
  }
  out.waic = -2.0 * out.lppd + 2.0 * out.p_waic;
  const double m = out.pointwise.mean();
  const double var = n > 1 ? (out.pointwise.array() - m).square().sum() / static_cast<double>(n - 1) : 0.0;
  out.se = std::sqrt(static_cast<double>(n) * var);
  return out;
}

Eigen::MatrixXd pointwise_matrix(const mcmc::ChainSet& chains, const std::function<Vector(const Vector&)>& per_obs) {
  const Eigen::MatrixXd all = chains.pooled();
  Eigen::MatrixXd out;
  for (Eigen::Index r = 0; r < all.rows(); ++r) {
    const Vector v = per_obs(all.row(r).transpose());
    if (r == 0) out.resize(all.rows(), v.size());
    if (v.size() != out.cols()) throw DimensionError("pointwise log-likelihood length changed between draws");
    out.row(r) = v.transpose();
  }
  return out;
}

std::vector<ComparisonRow> compare_models(const std::vector<ModelScore>& models) {
  if (models.empty()) throw EmptyDataError("no models to compare");
  std::vector<ComparisonRow> rows;
  for (const auto& m : models) rows.push_back({m, 0.0, 0.0});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.score.waic < b.score.waic; });
  const double best = rows.front().score.waic;
  double total = 0.0;
  for (auto& r : rows) {
    r.delta_waic = r.score.waic - best;
    r.weight = std::exp(-0.5 * r.delta_waic);
    total += r.weight;
  }
  for (auto& r : rows) r.weight /= total;
  return rows;
}

std::string comparison_to_json(const std::vector<ComparisonRow>& rows) {
  json_io::Json models = json_io::Json::array();
  for (const auto& r : rows) {
    json_io::Json j;
    j["name"] = r.score.name;
    j["waic"] = r.score.waic;
    j["waic_se"] = r.score.waic_se;
    j["p_waic"] = r.score.p_waic;
    j["lppd"] = r.score.lppd;
    j["dic"] = r.score.dic;
    j["p_dic"] = r.score.p_dic;
    j["delta_waic"] = r.delta_waic;
    j["weight"] = r.weight;
    models.push_back(std::move(j));
  }
  json_io::Json out;
  out["models"] = std::move(models);
  return out.dump(2) + "\n";
}

}  // namespace bayescore::evidence
