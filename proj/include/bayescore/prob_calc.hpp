#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bayescore/errors.hpp"

namespace bayescore::prob {

/// Normalised probabilities over an ordered support. Labels are optional;
/// numeric grids usually leave them empty and keep the abscissae alongside.
class DiscretePrior {
 public:
  /// Throws ParameterError unless probs are non-negative and sum to 1 within 1e-12.
  explicit DiscretePrior(std::vector<double> probs, std::vector<std::string> labels = {});
  /// Normalises non-negative weights (at least one positive).
  static DiscretePrior from_weights(const std::vector<double>& weights, std::vector<std::string> labels = {});
  static DiscretePrior uniform(std::size_t k);

  const std::vector<double>& probs() const { return probs_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
  std::vector<std::string> labels_;
};

/// r x c contingency table of joint probabilities P(A_i B_j | I).
class JointTable {
 public:
  JointTable(Eigen::MatrixXd cells, std::vector<std::string> row_labels = {},
             std::vector<std::string> col_labels = {});

  const Eigen::MatrixXd& cells() const { return cells_; }
  const std::vector<std::string>& row_labels() const { return row_labels_; }
  const std::vector<std::string>& col_labels() const { return col_labels_; }

 private:
  Eigen::MatrixXd cells_;
  std::vector<std::string> row_labels_;
  std::vector<std::string> col_labels_;
};

struct Marginals {
  DiscretePrior row;
  DiscretePrior col;
};

Marginals marginalize(const JointTable& t);

/// P(A | B I) from the prior P(A|I), true positive rate P(B|A I) and false
/// positive rate P(B|not-A I).
double bayes_two_prop(double prior_a, double tpr, double fpr);

/// Posterior over a discrete support; prior-zero points stay zero.
/// Throws DegenerateError if no point keeps positive mass.
DiscretePrior bayes_grid(const DiscretePrior& prior, const std::vector<double>& log_likelihood);

/// P(A + B | I) = P(A|I) + P(B|I) - P(AB|I).
double generalized_sum(double p_a, double p_b, double p_ab);

/// Compensated sum, shared by modules that normalise long vectors.
double stable_sum(const std::vector<double>& v);

}  // namespace bayescore::prob
