#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bayescore/dist.hpp"
#include "bayescore/glm.hpp"
#include "bayescore/rng.hpp"
#include "bayescore/sampler.hpp"

namespace bayescore::predictive {

using Vector = Eigen::VectorXd;

/// Simulation index x new-case index.
struct PredictiveSample {
  Eigen::MatrixXd draws;
  std::vector<std::string> case_names;

  std::size_t simulations() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t cases() const { return static_cast<std::size_t>(draws.cols()); }
};

/// Flat prior over an unbounded range; cannot be simulated from.
struct ImproperUniform {};
using PriorInput = std::variant<dist::Distribution, ImproperUniform>;

/// Single-datum likelihood for a parameter draw (length 1 for univariate priors).
using LikelihoodFactory = std::function<dist::Distribution(const Vector& theta)>;

/// Draws theta from the prior, then one datum from the likelihood, n_sim
/// times. Throws ImproperPriorError for ImproperUniform.
PredictiveSample prior_predictive(const PriorInput& prior, const LikelihoodFactory& likelihood, Rng& rng,
                                  std::size_t n_sim);

/// One response per posterior draw per new case, draws in chain order.
/// Case j uses the substream rng.split(j). Throws DimensionError when the
/// chains or cases do not match the model.
PredictiveSample posterior_predictive(const mcmc::ChainSet& chains, const glm::CompiledModel& model,
                                      const glm::NewCases& cases, Rng& rng);

struct Histogram {
  /// bins + 1 increasing edges; the last bin is closed on the right.
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

/// Freedman-Diaconis bin width 2 IQR n^(-1/3); falls back to Sturges bins
/// when the IQR vanishes and to one bin when all values coincide.
Histogram freedman_diaconis(const std::vector<double>& values, std::size_t max_bins = 200);

struct CaseReport {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  Histogram histogram;
  std::optional<double> observed;
  /// Fraction of draws strictly below the observed value.
  std::optional<double> pit;
};

struct PredictiveReport {
  std::vector<CaseReport> cases;
  std::optional<double> observed_mean;
};

/// y_observed is empty (no calibration) or holds one value per case;
/// otherwise throws DimensionError.
PredictiveReport predictive_check_report(const PredictiveSample& pred, const std::vector<double>& y_observed);

/// Kolmogorov distance between the empirical distribution of values and U(0,1).
double ks_uniform_distance(std::vector<double> values);

/// Header "draw,<case names>", one row per simulation.
void write_predictive_csv(const PredictiveSample& pred, std::ostream& os);
std::string report_to_json(const PredictiveReport& report);

}  // namespace bayescore::predictive
