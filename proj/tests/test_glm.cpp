#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bayescore/glm.hpp"
#include "bayescore/json_io.hpp"
#include "bayescore/sampler.hpp"
#include "support/glm_fixtures.hpp"

using namespace bayescore;
using namespace bayescore::glm;

namespace {

constexpr double kLn2Pi = 1.8378770664093454836;

double log_norm(double x, double mu, double sd) {
  const double r = (x - mu) / sd;
  return -0.5 * kLn2Pi - std::log(sd) - 0.5 * r * r;
}

DesignMatrix one_predictor(const std::vector<double>& v) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = v[i];
  return DesignMatrix::from_predictors(p, {"x"});
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::size_t i = 0;
  for (double d : v) out(static_cast<Eigen::Index>(i++)) = d;
  return out;
}

std::vector<double> column(const mcmc::ChainSet& cs, const std::vector<Vector>& per_draw, std::size_t k) {
  (void)cs;
  std::vector<double> out;
  for (const auto& d : per_draw) out.push_back(d(static_cast<Eigen::Index>(k)));
  return out;
}

// Derived quantities for every pooled draw.
std::vector<Vector> derived_draws(const CompiledModel& m, const mcmc::ChainSet& cs) {
  std::vector<Vector> out;
  for (const auto& c : cs.chains) {
    for (Eigen::Index r = 0; r < c.rows(); ++r) out.push_back(m.derived(c.row(r).transpose()));
  }
  return out;
}

std::vector<std::vector<double>> derived_chains(const CompiledModel& m, const mcmc::ChainSet& cs,
                                                const std::function<double(const Vector&)>& f) {
  std::vector<std::vector<double>> out;
  for (const auto& c : cs.chains) {
    out.emplace_back();
    for (Eigen::Index r = 0; r < c.rows(); ++r) out.back().push_back(f(m.derived(c.row(r).transpose())));
  }
  return out;
}

std::size_t index_of(const std::vector<std::string>& names, const std::string& n) {
  const auto it = std::find(names.begin(), names.end(), n);
  REQUIRE(it != names.end());
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

TEST_CASE("standardize examples") {
  const auto st = standardize(vec({1, 2, 3}), one_predictor({10, 20, 30}));
  CHECK(st.zy(0) == doctest::Approx(-1.0));
  CHECK(st.zy(1) == doctest::Approx(0.0));
  CHECK(st.zy(2) == doctest::Approx(1.0));
  CHECK((st.zx.x.col(0).array() == 1.0).all());

  const auto s4 = standardize(vec({1, 2, 3, 5}), one_predictor({10, 20, 30, 40}));
  const double expect[] = {-1.1619, -0.3873, 0.3873, 1.1619};
  for (int i = 0; i < 4; ++i) CHECK(s4.zx.x(i, 1) == doctest::Approx(expect[i]).epsilon(1e-4));
  CHECK(s4.meta.x_sd[1] == doctest::Approx(12.9099).epsilon(1e-5));

  // Indicator columns pass through.
  const auto si = standardize(vec({1, 2, 3, 5}), one_predictor({0, 1, 1, 0}));
  CHECK_FALSE(si.meta.x_standardized[1]);
  CHECK(si.zx.x(1, 1) == 1.0);
}

TEST_CASE("standardize zero variance names the column") {
  Eigen::MatrixXd p(3, 2);
  p << 1, 4, 2, 4, 3, 4;
  const auto x = DesignMatrix::from_predictors(p, {"dose", "batch"});
  try {
    standardize(vec({1, 2, 3}), x);
    FAIL("expected ZeroVarianceError");
  } catch (const ZeroVarianceError& e) {
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
  CHECK_THROWS_AS(standardize(vec({2, 2, 2}), one_predictor({1, 2, 3})), ZeroVarianceError);
}

TEST_CASE("inverse links") {
  CHECK(apply_inverse_link(Link::Logistic, 0.0) == 0.5);
  CHECK(apply_inverse_link(Link::NaturalExp, 0.0) == 1.0);
  CHECK(apply_inverse_link(Link::NegativeInverse, -2.0) == 0.5);
  CHECK(apply_inverse_link(Link::Identity, 3.5) == 3.5);
  CHECK_THROWS_AS(apply_inverse_link(Link::NegativeInverse, 0.0), DomainError);
  CHECK_THROWS_AS(apply_inverse_link(Link::NegativeInverse, 1.0), DomainError);
  CHECK(apply_inverse_link(Link::Logistic, -800.0) >= 0.0);
  CHECK(apply_inverse_link(Link::Logistic, 800.0) == 1.0);
  CHECK(parse_link("logistic") == Link::Logistic);
  CHECK_THROWS_AS(parse_link("probit"), SpecError);
}

TEST_CASE("destandardize examples") {
  auto meta = Standardization::identity(2);
  CHECK(destandardize(meta, vec({0.3, -0.7})).isApprox(vec({0.3, -0.7})));

  meta.x_sd[1] = 2.0;
  meta.x_standardized[1] = true;
  meta.y_standardized = true;
  meta.y_sd = 4.0;
  CHECK(destandardize(meta, vec({0.0, 0.5}))(1) == doctest::Approx(1.0));

  auto logit_meta = Standardization::identity(2);
  logit_meta.x_sd[1] = 2.0;
  logit_meta.x_standardized[1] = true;
  CHECK(destandardize(logit_meta, vec({0.0, 0.5}))(1) == doctest::Approx(0.25));

  CHECK_THROWS_AS(destandardize(meta, vec({1, 2, 3})), MetaMismatchError);
  CHECK_THROWS_AS(apply_standardization(meta, DesignMatrix::intercept_only(3)), MetaMismatchError);
}

TEST_CASE("destandardize reproduces standardized predictions") {
  Eigen::MatrixXd p(5, 2);
  p << 1, 10, 2, 14, 4, 9, 7, 20, 8, 11;
  const auto x = DesignMatrix::from_predictors(p, {"a", "b"});
  const Vector y = vec({3, 5, 4, 9, 8});
  const auto st = standardize(y, x);
  const Vector zb = vec({0.2, 0.7, -0.4});
  const Vector b = destandardize(st.meta, zb);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double z_pred = st.zx.x.row(i).dot(zb);
    const double raw_pred = x.x.row(i).dot(b);
    CHECK(raw_pred == doctest::Approx(st.meta.y_mean + st.meta.y_sd * z_pred));
  }
  CHECK(destandardize_scale(st.meta, 0.5) == doctest::Approx(0.5 * st.meta.y_sd));
}

TEST_CASE("anova_recenter examples") {
  auto r = anova_recenter(1.0, vec({1, -1}));
  CHECK(r.a0 == doctest::Approx(1.0));
  CHECK(r.a.isApprox(vec({1, -1})));
  r = anova_recenter(2.5, vec({0, 0, 0}));
  CHECK(r.a0 == doctest::Approx(2.5));
  CHECK(r.a.norm() == doctest::Approx(0.0));
  r = anova_recenter(0.0, vec({2, 4, 6}));
  CHECK(r.a0 == doctest::Approx(4.0));
  CHECK(r.a.isApprox(vec({-2, 0, 2})));
}

TEST_CASE("compile: linear model at zero coefficients matches a hand computation") {
  const Vector y = vec({1, 2, 4});
  const auto x = one_predictor({1, 3, 2});
  ModelSpec s;
  s.intercept_prior = Fixed{dist::Gauss{0.0, 1.0}};
  s.slope_priors = {Fixed{dist::Gauss{0.0, 1.0}}};
  s.dispersion_prior = PositivePrior{dist::Gamma{1.0, 1.0}, PriorOn::Precision};
  const auto m = compile(s, y, x);
  REQUIRE(m.param_names() == std::vector<std::string>{"zb0", "zb[x]", "log_zsigma"});
  const Vector theta = Vector::Zero(3);  // precision exp(-2 * 0) = 1

  const double ybar = 7.0 / 3.0;
  const double sd = std::sqrt(((1 - ybar) * (1 - ybar) + (2 - ybar) * (2 - ybar) + (4 - ybar) * (4 - ybar)) / 2.0);
  double expected = 0.0;
  for (double v : {1.0, 2.0, 4.0}) expected += log_norm((v - ybar) / sd, 0.0, 1.0);
  // Two N(0,1) coefficient priors at 0, Gamma(1,1) at precision 1, and the
  // |d precision / d log sigma| = 2 Jacobian.
  expected += 2.0 * log_norm(0.0, 0.0, 1.0) - 1.0 + std::log(2.0);
  CHECK(m.target().log_density(theta) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.log_prior(theta) == doctest::Approx(2.0 * log_norm(0.0, 0.0, 1.0) - 1.0 + std::log(2.0)));
  // Raw-scale pointwise values carry the 1/sd change of variables.
  CHECK(m.log_likelihood(theta) ==
        doctest::Approx(expected - m.log_prior(theta) - 3.0 * std::log(sd)).epsilon(1e-12));
}

TEST_CASE("compile: zero-coefficient baselines") {
  const Vector y = vec({0, 1, 3, 2, 5});
  const auto x = one_predictor({0.5, 1.5, 2.0, 3.0, 4.5});
  ModelSpec p;
  p.likelihood = PoissonLik{};
  p.link = Link::NaturalExp;
  const auto pm = compile(p, y, x);
  double expected = 0.0;
  for (double v : {0.0, 1.0, 3.0, 2.0, 5.0}) expected += -1.0 - std::lgamma(v + 1.0);
  CHECK(pm.log_likelihood(Vector::Zero(2)) == doctest::Approx(expected));

  ModelSpec b;
  b.likelihood = BernoulliLik{};
  b.link = Link::Logistic;
  const auto bm = compile(b, vec({0, 1, 1, 0, 1}), x);
  CHECK(bm.log_likelihood(Vector::Zero(2)) == doctest::Approx(5.0 * std::log(0.5)));
  const Vector pw = bm.pointwise_log_lik(Vector::Zero(2));
  for (Eigen::Index i = 0; i < pw.size(); ++i) CHECK(pw(i) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("compile: disallowed pairings and bad inputs") {
  const Vector y = vec({0, 1, 1});
  const auto x = one_predictor({1, 2, 3});
  ModelSpec s;
  s.likelihood = BernoulliLik{};
  s.link = Link::Identity;
  CHECK_THROWS_AS(compile(s, y, x), SpecError);
  s.likelihood = PoissonLik{};
  s.link = Link::Logistic;
  CHECK_THROWS_AS(compile(s, y, x), SpecError);
  s.likelihood = ExponentialLik{};
  s.link = Link::NaturalExp;
  CHECK_THROWS_AS(compile(s, y, x), SpecError);
  s.likelihood = GaussLik{};
  s.link = Link::NegativeInverse;
  CHECK_THROWS_AS(compile(s, y, x), SpecError);

  ModelSpec b;
  b.likelihood = BernoulliLik{};
  b.link = Link::Logistic;
  CHECK_THROWS_AS(compile(b, vec({0, 2, 1}), x), DomainError);
  ModelSpec p;
  p.likelihood = PoissonLik{{1.0, 2.0}};
  p.link = Link::NaturalExp;
  CHECK_THROWS_AS(compile(p, vec({0, 2, 1}), x), DimensionError);
  p.likelihood = PoissonLik{{1.0, 0.0, 1.0}};
  CHECK_THROWS_AS(compile(p, vec({0, 2, 1}), x), DomainError);
  CHECK_THROWS_AS(compile(ModelSpec{}, vec({1, 2}), x), DimensionError);

  ModelSpec e;
  e.likelihood = ExponentialLik{};
  e.link = Link::NegativeInverse;
  CHECK_THROWS_AS(compile(e, vec({1, 2, 3}), x, Groups::from_labels({"a", "b", "a"})), SpecError);
  ModelSpec bad_prior;
  bad_prior.slope_priors = {Fixed{dist::Gamma{1.0, 1.0}}};
  CHECK_THROWS_AS(compile(bad_prior, vec({1, 2, 4}), x), SpecError);
  ModelSpec bad_scale;
  bad_scale.dispersion_prior = PositivePrior{dist::Gauss{1.0, 1.0}};
  CHECK_THROWS_AS(compile(bad_scale, vec({1, 2, 4}), x), SpecError);
}

TEST_CASE("exponential model: truncation and out-of-domain linear form") {
  const Vector y = vec({0.5, 1.2, 2.0, 0.3});
  const auto x = one_predictor({1.0, 2.0, 3.0, 4.0});
  ModelSpec s;
  s.likelihood = ExponentialLik{};
  s.link = Link::NegativeInverse;
  const auto m = compile(s, y, x);
  REQUIRE(m.param_names() == std::vector<std::string>{"log_gap_b0", "log_gap_b[x]"});
  // b = -exp(u) so every coefficient is negative.
  const Vector theta = vec({0.0, std::log(0.25)});
  const Vector d = m.derived(theta);
  CHECK(d(0) == doctest::Approx(-1.0));
  CHECK(d(1) == doctest::Approx(-0.25));
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double eta = -1.0 - 0.25 * x.x(i, 1);
    expected += std::log(-1.0 / eta) - y(i) * (-1.0 / eta);
  }
  CHECK(m.log_likelihood(theta) == doctest::Approx(expected));

  // Exponential likelihood with a real-line slope prior can reach eta >= 0.
  ModelSpec g = s;
  g.slope_priors = {Fixed{dist::Gauss{0.0, 1.0}}};
  const auto mg = compile(g, y, x);
  CHECK(mg.target().log_density(vec({0.0, 5.0})) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("gradient matches central finite differences for every family") {
  for (const auto& f : testmodel::glm_fixtures()) {
    CAPTURE(f.name);
    const auto m = compile(f.spec, f.y, f.x, f.groups);
    const auto& t = m.target();
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      Vector th = t.initial(rng);
      for (Eigen::Index k = 0; k < th.size(); ++k) th(k) += 0.3 * rng.normal();
      const double lp = t.log_density(th);
      if (!std::isfinite(lp)) continue;
      const Vector g = t.gradient(th);
      for (Eigen::Index k = 0; k < th.size(); ++k) {
        const double h = 1e-5 * std::max(1.0, std::abs(th(k)));
        Vector a = th, b = th;
        a(k) += h;
        b(k) -= h;
        const double fd = (t.log_density(a) - t.log_density(b)) / (2.0 * h);
        CAPTURE(m.param_names()[static_cast<std::size_t>(k)]);
        CHECK(std::abs(fd - g(k)) <= 1e-5 * std::max(1.0, std::abs(g(k))));
      }
    }
  }
}

TEST_CASE("every fixture yields finite density at its initial point and names its parameters") {
  for (const auto& f : testmodel::glm_fixtures()) {
    CAPTURE(f.name);
    const auto m = compile(f.spec, f.y, f.x, f.groups);
    Rng rng(3);
    const Vector th = m.target().initial(rng);
    CHECK(th.size() == static_cast<Eigen::Index>(m.param_names().size()));
    CHECK(std::isfinite(m.target().log_density(th)));
    CHECK(m.derived(th).size() == static_cast<Eigen::Index>(m.derived_names().size()));
    CHECK(m.pointwise_log_lik(th).size() == f.y.size());
  }
}

TEST_CASE("likelihood factorises over disjoint data") {
  for (const auto& f : testmodel::glm_fixtures()) {
    if (f.groups || f.name == "binomial" || f.name == "poisson") continue;
    CAPTURE(f.name);
    ModelSpec spec = f.spec;
    spec.standardize = false;
    const Eigen::Index n = f.y.size(), half = n / 2;
    const auto full = compile(spec, f.y, f.x);
    DesignMatrix x1{f.x.x.topRows(half), f.x.names}, x2{f.x.x.bottomRows(n - half), f.x.names};
    const auto m1 = compile(spec, f.y.head(half), x1);
    const auto m2 = compile(spec, f.y.tail(n - half), x2);
    Rng rng(5);
    const Vector th = full.target().initial(rng);
    const double lhs = full.target().log_density(th);
    const double rhs = m1.target().log_density(th) + m2.target().log_density(th) - full.log_prior(th);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("full conditionals only for conjugate-form gauss models") {
  const auto fx = testmodel::glm_fixtures();
  auto find = [&](const std::string& n) {
    for (const auto& f : fx) {
      if (f.name == n) return compile(f.spec, f.y, f.x, f.groups);
    }
    FAIL("missing fixture");
    throw;
  };
  CHECK(find("gauss").has_full_conditionals());
  CHECK(find("gauss-grouped-zeta").has_full_conditionals());
  CHECK(find("anova").has_full_conditionals());
  CHECK_FALSE(find("gauss-robust-priors").has_full_conditionals());
  CHECK_FALSE(find("student-t").has_full_conditionals());
  CHECK_FALSE(find("poisson").has_full_conditionals());
  CHECK_FALSE(find("anova-hetero").has_full_conditionals());
}

TEST_CASE("gibbs and hmc agree on a grouped gauss model") {
  const auto fx = testmodel::glm_fixtures(21, 60);
  const auto& f = fx[2];
  REQUIRE(f.name == "gauss-grouped-zeta");
  const auto m = compile(f.spec, f.y, f.x, f.groups);
  mcmc::SamplerConfig cfg;
  cfg.n_iter = 3000;
  cfg.n_warmup = 500;
  cfg.algorithm = mcmc::Gibbs{};
  const auto gibbs = mcmc::run(m.target(), cfg);
  cfg.algorithm = mcmc::HMC{0.03, 40};
  const auto hmc = mcmc::run(m.target(), cfg);
  for (const auto& name : {"zb[x1]", "zb[x2]", "zb0[g1]", "zeta", "log_zsigma"}) {
    CAPTURE(name);
    const auto a = gibbs.pooled_column(gibbs.index_of(name)), b = hmc.pooled_column(hmc.index_of(name));
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
    auto sd = [](const std::vector<double>& v, double mean) {
      double s = 0.0;
      for (double d : v) s += (d - mean) * (d - mean);
      return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    const double se = std::hypot(sd(a, ma) / std::sqrt(mcmc::ess(gibbs, name)), sd(b, mb) / std::sqrt(mcmc::ess(hmc, name)));
    CHECK(std::abs(ma - mb) < 4.0 * se);
  }
}

TEST_CASE("varying intercepts shrink toward the grand mean") {
  Rng rng(99);
  const std::vector<double> true_mean = {-2.0, -0.5, 0.4, 1.5, 3.0};
  const std::vector<int> sizes = {3, 5, 8, 4, 6};
  std::vector<double> y;
  std::vector<std::string> labels;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (int i = 0; i < sizes[g]; ++i) {
      y.push_back(true_mean[g] + 1.5 * rng.normal());
      labels.push_back("grp" + std::to_string(g));
    }
  }
  const Vector yv = Eigen::Map<Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  ModelSpec s;
  s.group_prior = Adaptive{};
  s.standardize = false;
  const auto groups = Groups::from_labels(labels);
  const auto m = compile(s, yv, DesignMatrix::intercept_only(y.size()), groups);
  mcmc::SamplerConfig cfg;
  cfg.n_iter = 6000;
  cfg.n_warmup = 1000;
  cfg.algorithm = mcmc::Gibbs{};
  const auto cs = mcmc::run(m.target(), cfg);
  const double grand = yv.mean();
  for (int g = 0; g < 5; ++g) {
    double gm = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (groups.index[i] == g + 1) {
        gm += y[i];
        ++cnt;
      }
    }
    gm /= cnt;
    const auto col = cs.pooled_column(cs.index_of("b0[grp" + std::to_string(g) + "]"));
    const double post = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    CAPTURE(g);
    CHECK(post >= std::min(gm, grand));
    CHECK(post <= std::max(gm, grand));
  }
}

TEST_CASE("hierarchical t models keep nu above 2") {
  const auto fx = testmodel::glm_fixtures();
  const auto& f = fx.back();
  REQUIRE(f.name == "anova-hetero");
  const auto m = compile(f.spec, f.y, f.x, f.groups);
  mcmc::SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 800;
  cfg.n_warmup = 200;
  cfg.algorithm = mcmc::HMC{0.05, 20};
  const auto cs = mcmc::run(m.target(), cfg);
  const std::size_t k = index_of(m.derived_names(), "nu");
  for (const auto& d : derived_draws(m, cs)) CHECK(d(static_cast<Eigen::Index>(k)) > 2.0);
  CHECK(std::find(m.derived_names().begin(), m.derived_names().end(), "a0") != m.derived_names().end());
}

TEST_CASE("standardised fit matches the raw fit with transformed priors") {
  Rng rng(2024);
  const int n = 40;
  Eigen::MatrixXd p(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    p(i, 0) = 10.0 + 3.0 * rng.normal();
    y(i) = 3.0 + 2.0 * p(i, 0) + 4.0 * rng.normal();
  }
  const auto x = DesignMatrix::from_predictors(p, {"x"});
  ModelSpec zs;
  zs.dispersion_prior = PositivePrior{dist::InverseGamma{2.0, 1.0}, PriorOn::Variance};
  const auto zm = compile(zs, y, x);
  const auto& meta = zm.meta();

  // Same prior on the raw scale with a centred predictor.
  const double sy = meta.y_sd, sx = meta.x_sd[1], xbar = meta.x_mean[1];
  Eigen::MatrixXd pc = p.array() - xbar;
  ModelSpec rs;
  rs.standardize = false;
  rs.intercept_prior = Fixed{dist::Gauss{meta.y_mean, sy}};
  rs.slope_priors = {Fixed{dist::Gauss{0.0, sy / sx}}};
  rs.dispersion_prior = PositivePrior{dist::InverseGamma{2.0, sy * sy}, PriorOn::Variance};
  const auto rm = compile(rs, y, DesignMatrix::from_predictors(pc, {"x"}));

  mcmc::SamplerConfig cfg;
  cfg.n_iter = 6000;
  cfg.n_warmup = 1000;
  cfg.algorithm = mcmc::Gibbs{};
  const auto zcs = mcmc::run(zm.target(), cfg);
  const auto rcs = mcmc::run(rm.target(), cfg);
  for (double xnew : {4.0, 10.0, 17.0}) {
    CAPTURE(xnew);
    const auto za = derived_chains(zm, zcs, [&](const Vector& d) { return d(0) + d(1) * xnew; });
    const auto ra = derived_chains(rm, rcs, [&](const Vector& d) { return d(0) + d(1) * (xnew - xbar); });
    auto mean_se = [](const std::vector<std::vector<double>>& ch) {
      std::vector<double> all;
      for (const auto& c : ch) all.insert(all.end(), c.begin(), c.end());
      const double m = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
      double s = 0.0;
      for (double v : all) s += (v - m) * (v - m);
      const double sd = std::sqrt(s / static_cast<double>(all.size() - 1));
      return std::make_pair(m, sd / std::sqrt(mcmc::ess(ch)));
    };
    const auto [zmean, zse] = mean_se(za);
    const auto [rmean, rse] = mean_se(ra);
    CHECK(std::abs(zmean - rmean) < 3.0 * std::hypot(zse, rse));
  }
}

TEST_CASE("draw_response and check_cases") {
  const auto fx = testmodel::glm_fixtures();
  const auto& f = fx[2];
  const auto m = compile(f.spec, f.y, f.x, f.groups);
  Rng rng(1);
  const Vector th = m.target().initial(rng);
  NewCases cases{DesignMatrix::from_predictors(Eigen::MatrixXd::Constant(2, 2, 1.0), {"x1", "x2"}), {1, 0}, {}, {}};
  CHECK_NOTHROW(m.check_cases(cases));
  CHECK(std::isfinite(m.draw_response(th, cases, 0, rng)));
  CHECK(std::isfinite(m.draw_response(th, cases, 1, rng)));
  NewCases wrong{DesignMatrix::intercept_only(2), {1, 1}, {}, {}};
  CHECK_THROWS_AS(m.check_cases(wrong), DimensionError);
  NewCases empty{DesignMatrix::from_predictors(Eigen::MatrixXd(0, 2), {"x1", "x2"}), {}, {}, {}};
  CHECK_THROWS_AS(m.check_cases(empty), DimensionError);
  NewCases bad_group{cases.x, {9, 1}, {}, {}};
  CHECK_THROWS_AS(m.check_cases(bad_group), DimensionError);

  // A fixed group prior has nothing to draw an unseen group from.
  const auto& a = fx[fx.size() - 2];
  const auto am = compile(a.spec, a.y, a.x, a.groups);
  CHECK_THROWS_AS(am.check_cases(NewCases{DesignMatrix::intercept_only(1), {0}, {}, {}}), DimensionError);
}

TEST_CASE("model document parsing") {
  const std::string text = R"({
    "likelihood": {"family": "binomial", "trials": "n"},
    "response": "y",
    "predictors": ["dose", "age"],
    "group": "site",
    "priors": {
      "slopes": {"age": {"family": "cauchy", "x0": 0, "gamma": 2.5}},
      "group": {"family": "adaptive", "scale": {"family": "cauchy", "x0": 0, "gamma": 1, "on": "sd"}}
    },
    "sampler": {"algorithm": "hmc", "chains": 2, "step_size": 0.05}
  })";
  const auto doc = parse_model_document(text);
  CHECK(doc.spec.link == Link::Logistic);
  CHECK(doc.response == "y");
  CHECK(doc.predictors == std::vector<std::string>{"dose", "age"});
  CHECK(*doc.group == "site");
  CHECK(*doc.trials_column == "n");
  REQUIRE(doc.spec.slope_priors.size() == 2);
  CHECK(std::get<Fixed>(doc.spec.slope_priors[1]).d.is<dist::Cauchy>());
  CHECK(std::get<Fixed>(doc.spec.slope_priors[0]).d.is<dist::Gauss>());
  CHECK(std::get<Adaptive>(*doc.spec.group_prior).scale.d.is<dist::Cauchy>());
  CHECK(doc.sampler.n_chains == 2);
  CHECK(std::get<mcmc::HMC>(doc.sampler.algorithm).step_size == 0.05);
  CHECK(std::find(doc.sampler_fields.begin(), doc.sampler_fields.end(), "iter") == doc.sampler_fields.end());

  auto message = [](const std::string& t) {
    try {
      parse_model_document(t);
    } catch (const SpecError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"likelihood": "probit", "response": "y"})").find("likelihood") != std::string::npos);
  CHECK(message(R"({"likelihood": "gauss", "response": "y", "colour": 1})").find("colour") != std::string::npos);
  CHECK(message(R"({"likelihood": "gauss", "response": "y", "priors": {"slope": {}}})").find("priors.slope") !=
        std::string::npos);
  CHECK(message(R"({"likelihood": "gauss", "response": "y", "priors": {"intercept": {"family": "gauss", "mu": 0, "sd": 1}}})")
            .find("sd") != std::string::npos);
  CHECK(message(R"({"likelihood": "gauss", "link": "logistic", "response": "y"})") != "no error");
  CHECK(message(R"({"likelihood": "gauss"})").find("response") != std::string::npos);
  CHECK(message("{not json").find("model") != std::string::npos);
  CHECK(message(R"({"likelihood": "gauss", "response": "y", "sampler": {"chain": 2}})").find("sampler.chain") !=
        std::string::npos);
}

TEST_CASE("distribution JSON round trip") {
  const std::vector<dist::Distribution> ds = {
      dist::Gauss{1.0, 2.0},        dist::Binomial{7, 0.3},       dist::NoncentralT{0.0, 1.0, 4.0},
      dist::InverseGamma{2.0, 3.0}, dist::TruncatedJeffreys{1, 5}, dist::NegativeBinomial{2.5, 0.4},
      dist::MultivariateGauss{Eigen::Vector2d(1, 2), Eigen::Matrix2d::Identity()}};
  for (const auto& d : ds) {
    const auto j = json_io::distribution_to_json(d);
    const auto back = json_io::distribution_from_json(json_io::Json::parse(j.dump()), "d");
    CHECK(json_io::distribution_to_json(back) == j);
  }
  CHECK_THROWS_AS(json_io::distribution_from_json(json_io::Json::parse(R"({"family":"gauss","mu":0,"sigma":-1})"), "d"),
                  SpecError);
  const auto pp = json_io::positive_prior_from_json(json_io::Json::parse(R"({"family":"gamma","alpha":1,"beta":2,"on":"precision"})"), "p");
  CHECK(pp.on == PriorOn::Precision);
}
