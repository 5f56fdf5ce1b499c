#pragma once

#include <string>
#include <vector>

#include "bayescore/errors.hpp"
#include "bayescore/prob_calc.hpp"
#include "bayescore/rng.hpp"

namespace bayescore::decision {

/// Discrete distribution over the outcome set.
class Lottery {
 public:
  /// Throws ParameterError unless probs are non-negative and sum to 1 within 1e-12.
  explicit Lottery(std::vector<double> probs);
  /// All mass on outcome `index` of `n_outcomes`.
  static Lottery sure(std::size_t index, std::size_t n_outcomes);

  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

/// alpha p + (1 - alpha) q. Throws DimensionError on differing outcome sets,
/// ParameterError unless 0 < alpha < 1.
Lottery mix(const Lottery& p, const Lottery& q, double alpha);

/// One lottery per state.
using Act = std::vector<Lottery>;

/// State-wise mixture of two acts.
Act mix_acts(const Act& f, const Act& g, double alpha);

struct DecisionMatrix {
  std::vector<std::string> states;
  std::vector<std::string> acts;
  prob::DiscretePrior state_prior = prob::DiscretePrior::uniform(1);
  /// cells[act][state].
  std::vector<Act> cells;
  std::vector<std::string> outcomes;
  std::vector<double> utilities;

  /// Throws DimensionError on shape mismatches, ParameterError on
  /// non-finite utilities, duplicate labels or an empty act set.
  void validate() const;
  /// Throws UnknownActError.
  std::size_t act_index(const std::string& act) const;
};

/// sum_x U(x) p(x).
double lottery_utility(const DecisionMatrix& m, const Lottery& p);
/// sum_w P(w) sum_x U(x) f(w)(x).
double expected_utility(const DecisionMatrix& m, const Act& f);
/// Throws UnknownActError.
double expected_utility(const DecisionMatrix& m, const std::string& act);

struct RankedAct {
  std::string act;
  double eu;
};

struct Ranking {
  std::string act;
  double eu;
  /// Descending EU; ties keep declaration order.
  std::vector<RankedAct> full_ranking;
};

Ranking best_act(const DecisionMatrix& m);

enum class AxiomStatus { Pass, Fail, NotChecked };
std::string to_string(AxiomStatus s);

struct AxiomCheck {
  std::string axiom;
  AxiomStatus status;
  std::size_t cases;
  /// Empty unless status is Fail.
  std::string counterexample;
};

struct AxiomReport {
  /// completeness, transitivity, independence, monotonicity, continuity.
  std::vector<AxiomCheck> checks;
  /// True when no check failed.
  bool passed() const;
};

/// Checks the EU-induced preference over the declared acts plus `samples`
/// random mixtures of them. Continuity is reported as not checked.
AxiomReport check_axioms(const DecisionMatrix& m, std::size_t samples, Rng& rng);

/// Same matrix with the state prior replaced by bayes_grid(prior, log_likelihood).
DecisionMatrix with_updated_prior(const DecisionMatrix& m, const std::vector<double>& log_likelihood);

/// {"states": [...], "prior": [...], "outcomes": [...], "utilities": [...],
///  "acts": {"name": [[lottery for state 1], ...]}}. Throws SpecError on
/// malformed documents, ParameterError on invalid lotteries or priors.
DecisionMatrix parse_decision_document(const std::string& json_text);
std::string decision_to_json(const DecisionMatrix& m);
std::string ranking_to_json(const Ranking& r);
std::string axiom_report_to_json(const AxiomReport& r);

}  // namespace bayescore::decision
