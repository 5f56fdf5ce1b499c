#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bayescore/errors.hpp"
#include "bayescore/rng.hpp"

namespace bayescore::mcmc {

using Vector = Eigen::VectorXd;

/// Unnormalised log posterior over an unconstrained parameter vector.
/// Every callable must be safe to invoke concurrently.
struct LogTarget {
  std::vector<std::string> param_names;
  std::function<double(const Vector&)> log_density;
  /// Optional analytic gradient of log_density.
  std::function<Vector(const Vector&)> gradient;
  /// Optional: entry i draws coordinate i from its full conditional given the rest.
  std::vector<std::function<double(const Vector&, Rng&)>> full_conditionals;
  /// Optional: draws a starting point (typically from the prior).
  std::function<Vector(Rng&)> initial;

  std::size_t dimension() const { return param_names.size(); }
};

struct MH {
  /// Per-coordinate proposal sd; a single entry is broadcast.
  std::vector<double> step_scale{1.0};
};
struct Gibbs {};
struct HMC {
  double step_size = 0.1;
  int n_leapfrog = 10;
};
using Algorithm = std::variant<MH, Gibbs, HMC>;

struct SamplerConfig {
  std::size_t n_chains = 4;
  /// Total iterations per chain, warmup included.
  std::size_t n_iter = 2000;
  std::size_t n_warmup = 1000;
  std::size_t thin = 1;
  Algorithm algorithm = MH{};
  std::uint64_t seed = 1;
  /// Optional starting point per chain (one entry per chain when given).
  std::vector<Vector> init;

  /// Throws ParameterError on an invalid combination.
  void validate() const;
  std::size_t draws_per_chain() const { return (n_iter - n_warmup + thin - 1) / thin; }
};

/// |Delta H| above which an HMC transition counts as divergent.
inline constexpr double kDivergenceThreshold = 1000.0;

struct ChainSet {
  std::vector<std::string> names;
  /// One (draws x dimension) matrix per chain, post-warmup and thinned.
  std::vector<Eigen::MatrixXd> chains;
  std::size_t warmup_used = 0;
  std::size_t thin = 1;
  /// Key of each chain's RNG stream.
  std::vector<std::uint64_t> seeds;
  std::vector<double> acceptance_rate;
  std::vector<std::size_t> divergences;

  std::size_t dimension() const { return names.size(); }
  std::size_t n_chains() const { return chains.size(); }
  std::size_t draws_per_chain() const { return chains.empty() ? 0 : static_cast<std::size_t>(chains[0].rows()); }
  std::size_t total_draws() const { return n_chains() * draws_per_chain(); }
  /// Column index of a parameter; ParameterError if unknown.
  std::size_t index_of(const std::string& param) const;
  /// All chains stacked (chain 0 first).
  Eigen::MatrixXd pooled() const;
  std::vector<double> pooled_column(std::size_t j) const;
  /// Throws ConsistencyError when chains disagree in shape.
  void validate() const;
};

ChainSet run_mh(const LogTarget& target, const SamplerConfig& cfg);
ChainSet run_gibbs(const LogTarget& target, const SamplerConfig& cfg);
ChainSet run_hmc(const LogTarget& target, const SamplerConfig& cfg);
/// Dispatches on cfg.algorithm.
ChainSet run(const LogTarget& target, const SamplerConfig& cfg);

struct PhasePoint {
  Vector x;
  Vector p;
};
/// n_steps leapfrog steps of Hamiltonian dynamics with potential -log_density
/// and identity mass matrix.
PhasePoint leapfrog(const LogTarget& target, PhasePoint z, double step_size, int n_steps);
/// -log_density(x) + |p|^2 / 2.
double hamiltonian(const LogTarget& target, const PhasePoint& z);

/// Number of worker threads for chains: BAYESCORE_THREADS if set, else hardware concurrency.
std::size_t worker_threads();

// Diagnostics.

/// Split-chain potential scale reduction; needs >= 2 chains of >= 4 draws.
double rhat(const ChainSet& cs, const std::string& param);
/// Multi-chain effective sample size with Geyer truncation, capped at the draw count.
double ess(const ChainSet& cs, const std::string& param);
double ess(const std::vector<std::vector<double>>& chains);
double rhat(const std::vector<std::vector<double>>& chains);

/// Shortest interval holding ceil(mass * N) of the sorted draws.
std::pair<double, double> hpd_interval(std::vector<double> draws, double mass = 0.95);
/// Biased-normalised sample autocorrelation at lags 0..max_lag.
std::vector<double> autocorr(const std::vector<double>& draws, std::size_t max_lag);

struct ParamSummary {
  std::string name;
  double mean;
  double sd;
  double q025;
  double median;
  double q975;
  double hpd_low;
  double hpd_high;
  double ess;
  /// Empty when the chain layout does not allow it (single chain, zero variance).
  std::optional<double> rhat;
  double mcse;
};

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> v, double p);
std::vector<ParamSummary> summarize(const ChainSet& cs, double hpd_mass = 0.95);

/// CSV: chain,iteration,<names...>; shortest round-trip number formatting.
void write_draws_csv(const ChainSet& cs, std::ostream& os);
ChainSet read_draws_csv(std::istream& is);

}  // namespace bayescore::mcmc
