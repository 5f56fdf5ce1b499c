#include "bayescore/prob_calc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bayescore::prob {

namespace {

constexpr double kNormTol = 1e-12;

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConsistencyError(std::string(what) + " must lie in [0,1], got " + std::to_string(p));
  }
}

void check_labels(std::size_t n, const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != n) {
    throw ParameterError("label count " + std::to_string(labels.size()) + " does not match " + std::to_string(n) +
                         " entries");
  }
}

}  // namespace

double stable_sum(const std::vector<double>& v) {
  // Neumaier's variant of Kahan summation.
  double sum = 0.0;
  double comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

DiscretePrior::DiscretePrior(std::vector<double> probs, std::vector<std::string> labels)
    : probs_(std::move(probs)), labels_(std::move(labels)) {
  if (probs_.empty()) throw ParameterError("discrete distribution needs at least one point");
  check_labels(probs_.size(), labels_);
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("probabilities must be finite and non-negative");
  }
  const double total = stable_sum(probs_);
  if (std::abs(total - 1.0) > kNormTol) {
    throw ParameterError("probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

DiscretePrior DiscretePrior::from_weights(const std::vector<double>& weights, std::vector<std::string> labels) {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("weights must be finite and non-negative");
  }
  const double total = stable_sum(weights);
  if (!(total > 0.0)) throw DegenerateError("all weights are zero");
  std::vector<double> p(weights.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = weights[i] / total;
  return DiscretePrior(std::move(p), std::move(labels));
}

DiscretePrior DiscretePrior::uniform(std::size_t k) {
  if (k == 0) throw ParameterError("uniform distribution needs at least one point");
  return DiscretePrior(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

JointTable::JointTable(Eigen::MatrixXd cells, std::vector<std::string> row_labels,
                       std::vector<std::string> col_labels)
    : cells_(std::move(cells)), row_labels_(std::move(row_labels)), col_labels_(std::move(col_labels)) {
  if (cells_.size() == 0) throw ParameterError("joint table is empty");
  check_labels(static_cast<std::size_t>(cells_.rows()), row_labels_);
  check_labels(static_cast<std::size_t>(cells_.cols()), col_labels_);
  if (!cells_.allFinite() || cells_.minCoeff() < 0.0) throw ParameterError("joint table cells must be >= 0");
  const double total = stable_sum(std::vector<double>(cells_.data(), cells_.data() + cells_.size()));
  if (std::abs(total - 1.0) > kNormTol) {
    throw ParameterError("joint table sums to " + std::to_string(total) + ", not 1");
  }
}

Marginals marginalize(const JointTable& t) {
  const Eigen::MatrixXd& c = t.cells();
  std::vector<double> row(static_cast<std::size_t>(c.rows()));
  std::vector<double> col(static_cast<std::size_t>(c.cols()));
  for (Eigen::Index i = 0; i < c.rows(); ++i) row[static_cast<std::size_t>(i)] = c.row(i).sum();
  for (Eigen::Index j = 0; j < c.cols(); ++j) col[static_cast<std::size_t>(j)] = c.col(j).sum();
  // Renormalise away the last-ulp drift so the marginals satisfy the same invariant.
  return Marginals{DiscretePrior::from_weights(row, t.row_labels()), DiscretePrior::from_weights(col, t.col_labels())};
}

double bayes_two_prop(double prior_a, double tpr, double fpr) {
  check_probability(prior_a, "prior");
  check_probability(tpr, "true positive rate");
  check_probability(fpr, "false positive rate");
  const double num = tpr * prior_a;
  const double den = num + fpr * (1.0 - prior_a);
  if (den == 0.0) throw DegenerateError("the evidence is impossible under both hypotheses");
  return num / den;
}

DiscretePrior bayes_grid(const DiscretePrior& prior, const std::vector<double>& log_likelihood) {
  if (log_likelihood.size() != prior.size()) {
    throw DimensionError("likelihood has " + std::to_string(log_likelihood.size()) + " points, prior has " +
                         std::to_string(prior.size()));
  }
  const std::size_t n = prior.size();
  std::vector<double> lw(n, -std::numeric_limits<double>::infinity());
  double max_lw = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(log_likelihood[i])) throw DomainError("NaN log-likelihood at point " + std::to_string(i));
    if (prior[i] > 0.0 && log_likelihood[i] > -std::numeric_limits<double>::infinity()) {
      lw[i] = std::log(prior[i]) + log_likelihood[i];
      max_lw = std::max(max_lw, lw[i]);
    }
  }
  if (!std::isfinite(max_lw)) {
    if (max_lw == std::numeric_limits<double>::infinity()) throw DomainError("log-likelihood of +inf");
    throw DegenerateError("all posterior mass vanished");
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(lw[i] - max_lw);
  return DiscretePrior::from_weights(w, prior.labels());
}

double generalized_sum(double p_a, double p_b, double p_ab) {
  check_probability(p_a, "P(A)");
  check_probability(p_b, "P(B)");
  check_probability(p_ab, "P(AB)");
  if (p_ab > std::min(p_a, p_b)) throw ConsistencyError("P(AB) exceeds min(P(A), P(B))");
  const double r = p_a + p_b - p_ab;
  if (r > 1.0 + 1e-15) throw ConsistencyError("P(A) + P(B) - P(AB) exceeds 1");
  return std::min(r, 1.0);
}

}  // namespace bayescore::prob
