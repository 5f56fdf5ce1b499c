#pragma once

// Gauss likelihood with mu | s2 ~ N(m0, s2) and s2 ~ IG(a0, b0), sampled
// over (mu, log s2). Written independently of the glm module so sampler
// tests do not depend on it.

#include <cmath>
#include <vector>

#include "bayescore/dist.hpp"
#include "bayescore/sampler.hpp"

namespace testmodel {

inline bayescore::mcmc::LogTarget gauss_conjugate_target(const std::vector<double>& y, double m0, double a0,
                                                         double b0) {
  using bayescore::mcmc::Vector;
  const double n = static_cast<double>(y.size());
  double sum = 0.0;
  for (double v : y) sum += v;
  bayescore::mcmc::LogTarget t;
  t.param_names = {"mu", "log_sigma2"};
  t.log_density = [=](const Vector& th) {
    const double mu = th(0), ls = th(1), s2 = std::exp(ls);
    double ss = (mu - m0) * (mu - m0);
    for (double v : y) ss += (v - mu) * (v - mu);
    // (n + 1)/2 Gauss kernels, IG(a0, b0) kernel, Jacobian exp(ls).
    return -0.5 * (n + 1.0) * ls - ss / (2.0 * s2) - (a0 + 1.0) * ls - b0 / s2 + ls;
  };
  t.gradient = [=](const Vector& th) {
    const double mu = th(0), ls = th(1), s2 = std::exp(ls);
    double ss = (mu - m0) * (mu - m0);
    double dss = 2.0 * (mu - m0);
    for (double v : y) {
      ss += (v - mu) * (v - mu);
      dss -= 2.0 * (v - mu);
    }
    Vector g(2);
    g(0) = -dss / (2.0 * s2);
    g(1) = -0.5 * (n + 1.0) + ss / (2.0 * s2) - a0 + b0 / s2;
    return g;
  };
  t.full_conditionals = {
      [=](const Vector& th, bayescore::Rng& rng) {
        const double s2 = std::exp(th(1));
        return bayescore::dist::draw(bayescore::dist::Gauss{(m0 + sum) / (n + 1.0), std::sqrt(s2 / (n + 1.0))}, rng);
      },
      [=](const Vector& th, bayescore::Rng& rng) {
        const double mu = th(0);
        double ss = (mu - m0) * (mu - m0);
        for (double v : y) ss += (v - mu) * (v - mu);
        return std::log(bayescore::dist::draw(bayescore::dist::InverseGamma{a0 + 0.5 * (n + 1.0), b0 + 0.5 * ss}, rng));
      }};
  t.initial = [=](bayescore::Rng& rng) {
    Vector v(2);
    v << sum / n + rng.normal() * 0.1, rng.normal() * 0.1;
    return v;
  };
  return t;
}

}  // namespace testmodel
