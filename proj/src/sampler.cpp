#include "bayescore/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <unsupported/Eigen/FFT>

namespace bayescore::mcmc {

namespace {

constexpr int kMaxInitAttempts = 1000;

struct ChainResult {
  Eigen::MatrixXd draws;
  double acceptance = 0.0;
  std::size_t divergences = 0;
  std::uint64_t key = 0;
};

// One transition kernel per algorithm; returns whether the move was accepted.
using Kernel = std::function<bool(Vector& x, double& lp, Rng& rng, std::size_t& divergences)>;

Vector initial_point(const LogTarget& target, const SamplerConfig& cfg, std::size_t chain, Rng& rng) {
  const auto dim = static_cast<Eigen::Index>(target.dimension());
  if (!cfg.init.empty()) {
    const Vector& x = cfg.init[chain];
    if (x.size() != dim) throw InitError("initial value for chain " + std::to_string(chain) + " has wrong dimension");
    if (!std::isfinite(target.log_density(x))) {
      throw InitError("log density is not finite at the supplied initial value of chain " + std::to_string(chain));
    }
    return x;
  }
  for (int attempt = 0; attempt < kMaxInitAttempts; ++attempt) {
    Vector x(dim);
    if (target.initial) {
      x = target.initial(rng);
    } else {
      for (Eigen::Index i = 0; i < dim; ++i) x(i) = rng.normal();
    }
    if (std::isfinite(target.log_density(x))) return x;
  }
  throw InitError("no starting point with finite log density found in " + std::to_string(kMaxInitAttempts) +
                  " attempts");
}

ChainResult run_chain(const LogTarget& target, const SamplerConfig& cfg, std::size_t chain, const Kernel& kernel) {
  Rng rng = Rng(cfg.seed).split(chain);
  ChainResult r;
  r.key = rng.key();
  Vector x = initial_point(target, cfg, chain, rng);
  double lp = target.log_density(x);
  const auto dim = static_cast<Eigen::Index>(target.dimension());
  r.draws.resize(static_cast<Eigen::Index>(cfg.draws_per_chain()), dim);
  std::size_t accepted = 0;
  Eigen::Index row = 0;
  for (std::size_t it = 0; it < cfg.n_iter; ++it) {
    const bool acc = kernel(x, lp, rng, r.divergences);
    if (it < cfg.n_warmup) continue;
    if (acc) ++accepted;
    if ((it - cfg.n_warmup) % cfg.thin == 0) r.draws.row(row++) = x.transpose();
  }
  r.acceptance = static_cast<double>(accepted) / static_cast<double>(cfg.n_iter - cfg.n_warmup);
  return r;
}

ChainSet run_chains(const LogTarget& target, const SamplerConfig& cfg, const Kernel& kernel) {
  cfg.validate();
  if (target.dimension() == 0) throw ParameterError("target has no parameters");
  if (!target.log_density) throw ParameterError("target has no log density");
  std::vector<ChainResult> results(cfg.n_chains);
  std::vector<std::exception_ptr> errors(cfg.n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cfg.n_chains; c = next++) {
      try {
        results[c] = run_chain(target, cfg, c, kernel);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(worker_threads(), cfg.n_chains);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ChainSet cs;
  cs.names = target.param_names;
  cs.warmup_used = cfg.n_warmup;
  cs.thin = cfg.thin;
  for (auto& r : results) {
    cs.chains.push_back(std::move(r.draws));
    cs.seeds.push_back(r.key);
    cs.acceptance_rate.push_back(r.acceptance);
    cs.divergences.push_back(r.divergences);
  }
  return cs;
}

Vector broadcast_scale(const std::vector<double>& s, std::size_t dim) {
  if (s.size() == 1) return Vector::Constant(static_cast<Eigen::Index>(dim), s[0]);
  if (s.size() != dim) {
    throw ParameterError("step_scale has " + std::to_string(s.size()) + " entries for " + std::to_string(dim) +
                         " parameters");
  }
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(dim));
}

// Autocovariance (divided by n) at lags 0..n-1 via zero-padded FFT.
std::vector<double> autocovariance(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> padded(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
  std::vector<double> back;
  fft.inv(back, freq);
  std::vector<double> acov(n);
  for (std::size_t k = 0; k < n; ++k) acov[k] = back[k] / static_cast<double>(n);
  return acov;
}

struct VarianceParts {
  double w;      // mean within-chain variance (n - 1 denominator)
  double v_hat;  // pooled posterior variance estimate
};

VarianceParts variance_parts(const std::vector<std::vector<double>>& chains) {
  const auto m = static_cast<double>(chains.size());
  const auto n = static_cast<double>(chains[0].size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    const double mu = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    w += ss / (n - 1.0);
  }
  w /= m;
  double b_over_n = 0.0;
  if (chains.size() > 1) {
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= (m - 1.0);
  }
  return {w, (n - 1.0) / n * w + b_over_n};
}

void check_layout(const std::vector<std::vector<double>>& chains, std::size_t min_chains, std::size_t min_draws) {
  if (chains.size() < min_chains) throw ParameterError("need at least " + std::to_string(min_chains) + " chains");
  for (const auto& c : chains) {
    if (c.size() != chains[0].size()) throw ConsistencyError("chains differ in length");
    if (c.size() < min_draws) throw ParameterError("need at least " + std::to_string(min_draws) + " draws per chain");
  }
}

std::vector<std::vector<double>> columns_of(const ChainSet& cs, const std::string& param) {
  const std::size_t j = cs.index_of(param);
  std::vector<std::vector<double>> out;
  for (const auto& c : cs.chains) {
    const auto col = c.col(static_cast<Eigen::Index>(j));
    out.emplace_back(col.data(), col.data() + col.size());
  }
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ParameterError("n_chains must be >= 1");
  if (n_warmup >= n_iter) throw ParameterError("n_warmup must be < n_iter");
  if (thin < 1) throw ParameterError("thin must be >= 1");
  if (!init.empty() && init.size() != n_chains) throw ParameterError("init must give one vector per chain");
  if (const auto* h = std::get_if<HMC>(&algorithm)) {
    if (!(h->step_size > 0.0)) throw ParameterError("HMC step_size must be > 0");
    if (h->n_leapfrog < 1) throw ParameterError("HMC n_leapfrog must be >= 1");
  }
  if (const auto* m = std::get_if<MH>(&algorithm)) {
    if (m->step_scale.empty()) throw ParameterError("MH step_scale is empty");
    for (double s : m->step_scale) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("MH step_scale entries must be > 0");
    }
  }
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("BAYESCORE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::size_t ChainSet::index_of(const std::string& param) const {
  const auto it = std::find(names.begin(), names.end(), param);
  if (it == names.end()) throw ParameterError("unknown parameter '" + param + "'");
  return static_cast<std::size_t>(it - names.begin());
}

Eigen::MatrixXd ChainSet::pooled() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(total_draws()), static_cast<Eigen::Index>(dimension()));
  Eigen::Index row = 0;
  for (const auto& c : chains) {
    out.middleRows(row, c.rows()) = c;
    row += c.rows();
  }
  return out;
}

std::vector<double> ChainSet::pooled_column(std::size_t j) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (const auto& c : chains) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) out.push_back(c(i, static_cast<Eigen::Index>(j)));
  }
  return out;
}

void ChainSet::validate() const {
  if (chains.empty()) throw ConsistencyError("chain set is empty");
  for (const auto& c : chains) {
    if (c.cols() != static_cast<Eigen::Index>(names.size())) throw ConsistencyError("chain width differs from names");
    if (c.rows() != chains[0].rows()) throw ConsistencyError("chains differ in length");
    if (c.rows() < 1) throw ConsistencyError("chain has no draws");
  }
}

ChainSet run_mh(const LogTarget& target, const SamplerConfig& cfg) {
  const auto* mh = std::get_if<MH>(&cfg.algorithm);
  if (!mh) throw ParameterError("run_mh needs an MH configuration");
  cfg.validate();
  const Vector scale = broadcast_scale(mh->step_scale, target.dimension());
  Kernel k = [&](Vector& x, double& lp, Rng& rng, std::size_t&) {
    Vector prop = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) prop(i) += scale(i) * rng.normal();
    const double lp_prop = target.log_density(prop);
    if (std::log(rng.uniform()) < lp_prop - lp) {
      x = std::move(prop);
      lp = lp_prop;
      return true;
    }
    return false;
  };
  return run_chains(target, cfg, k);
}

ChainSet run_gibbs(const LogTarget& target, const SamplerConfig& cfg) {
  if (target.full_conditionals.size() != target.dimension()) {
    throw MissingConditionalError("Gibbs sampling needs a full conditional for every coordinate");
  }
  for (const auto& f : target.full_conditionals) {
    if (!f) throw MissingConditionalError("Gibbs sampling needs a full conditional for every coordinate");
  }
  Kernel k = [&](Vector& x, double& lp, Rng& rng, std::size_t&) {
    for (std::size_t i = 0; i < target.dimension(); ++i) {
      x(static_cast<Eigen::Index>(i)) = target.full_conditionals[i](x, rng);
    }
    lp = target.log_density(x);
    return true;
  };
  return run_chains(target, cfg, k);
}

PhasePoint leapfrog(const LogTarget& target, PhasePoint z, double step_size, int n_steps) {
  Vector g = target.gradient(z.x);
  for (int s = 0; s < n_steps; ++s) {
    z.p += 0.5 * step_size * g;
    z.x += step_size * z.p;
    g = target.gradient(z.x);
    z.p += 0.5 * step_size * g;
  }
  return z;
}

double hamiltonian(const LogTarget& target, const PhasePoint& z) {
  return -target.log_density(z.x) + 0.5 * z.p.squaredNorm();
}

ChainSet run_hmc(const LogTarget& target, const SamplerConfig& cfg) {
  const auto* hmc = std::get_if<HMC>(&cfg.algorithm);
  if (!hmc) throw ParameterError("run_hmc needs an HMC configuration");
  if (!target.gradient) throw ParameterError("HMC needs a gradient");
  const HMC h = *hmc;
  Kernel k = [&target, h](Vector& x, double& lp, Rng& rng, std::size_t& divergences) {
    PhasePoint z{x, Vector(x.size())};
    for (Eigen::Index i = 0; i < x.size(); ++i) z.p(i) = rng.normal();
    const double h0 = -lp + 0.5 * z.p.squaredNorm();
    const PhasePoint end = leapfrog(target, z, h.step_size, h.n_leapfrog);
    const double lp_end = target.log_density(end.x);
    const double h1 = -lp_end + 0.5 * end.p.squaredNorm();
    const double delta = h1 - h0;
    const double u = rng.uniform();
    if (!std::isfinite(delta) || std::abs(delta) > kDivergenceThreshold) {
      ++divergences;
      return false;
    }
    if (std::log(u) < -delta) {
      x = end.x;
      lp = lp_end;
      return true;
    }
    return false;
  };
  return run_chains(target, cfg, k);
}

ChainSet run(const LogTarget& target, const SamplerConfig& cfg) {
  return std::visit(
      [&](const auto& alg) -> ChainSet {
        using A = std::decay_t<decltype(alg)>;
        if constexpr (std::is_same_v<A, MH>) return run_mh(target, cfg);
        if constexpr (std::is_same_v<A, Gibbs>) return run_gibbs(target, cfg);
        if constexpr (std::is_same_v<A, HMC>) return run_hmc(target, cfg);
      },
      cfg.algorithm);
}

double rhat(const std::vector<std::vector<double>>& chains) {
  check_layout(chains, 2, 4);
  // Split every chain into halves; a middle draw of an odd chain is dropped.
  std::vector<std::vector<double>> halves;
  const std::size_t half = chains[0].size() / 2;
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  const VarianceParts vp = variance_parts(halves);
  if (vp.w == 0.0) throw DegenerateError("within-chain variance is zero");
  return std::sqrt(std::max(1.0, vp.v_hat / vp.w));
}

double rhat(const ChainSet& cs, const std::string& param) { return rhat(columns_of(cs, param)); }

double ess(const std::vector<std::vector<double>>& chains) {
  check_layout(chains, 1, 4);
  const VarianceParts vp = variance_parts(chains);
  if (vp.w == 0.0) throw DegenerateError("within-chain variance is zero");
  const std::size_t n = chains[0].size();
  std::vector<double> mean_acov(n, 0.0);
  for (const auto& c : chains) {
    const auto a = autocovariance(c);
    for (std::size_t t = 0; t < n; ++t) mean_acov[t] += a[t] / static_cast<double>(chains.size());
  }
  auto rho = [&](std::size_t t) { return 1.0 - (vp.w - mean_acov[t]) / vp.v_hat; };
  // Geyer initial positive sequence, made monotone.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  const double total = static_cast<double>(n * chains.size());
  if (!(tau > 1.0)) return total;
  return std::min(total, total / tau);
}

double ess(const ChainSet& cs, const std::string& param) { return ess(columns_of(cs, param)); }

std::pair<double, double> hpd_interval(std::vector<double> draws, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw ParameterError("HPD mass must lie in (0,1)");
  if (draws.empty()) throw ParameterError("HPD interval needs draws");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  const auto keep = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  const std::size_t window = std::clamp<std::size_t>(keep, 1, n);
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + window <= n; ++i) {
    const double w = draws[i + window - 1] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + window - 1]};
}

std::vector<double> autocorr(const std::vector<double>& draws, std::size_t max_lag) {
  if (2 * max_lag >= draws.size()) throw ParameterError("max_lag must be < N/2");
  const auto acov = autocovariance(draws);
  if (acov[0] == 0.0) throw DegenerateError("sequence has zero variance");
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) out[k] = acov[k] / acov[0];
  return out;
}

double sample_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ParameterError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<ParamSummary> summarize(const ChainSet& cs, double hpd_mass) {
  cs.validate();
  std::vector<ParamSummary> out;
  for (std::size_t j = 0; j < cs.dimension(); ++j) {
    const auto col = cs.pooled_column(j);
    const double n = static_cast<double>(col.size());
    ParamSummary s;
    s.name = cs.names[j];
    s.mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : col) ss += (v - s.mean) * (v - s.mean);
    s.sd = col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.q025 = sample_quantile(col, 0.025);
    s.median = sample_quantile(col, 0.5);
    s.q975 = sample_quantile(col, 0.975);
    std::tie(s.hpd_low, s.hpd_high) = hpd_interval(col, hpd_mass);
    const auto chains = columns_of(cs, cs.names[j]);
    try {
      s.ess = ess(chains);
    } catch (const Error&) {
      s.ess = n;
    }
    try {
      s.rhat = rhat(chains);
    } catch (const Error&) {
      s.rhat.reset();
    }
    s.mcse = s.sd / std::sqrt(s.ess);
    out.push_back(s);
  }
  return out;
}

void write_draws_csv(const ChainSet& cs, std::ostream& os) {
  cs.validate();
  os << "chain,iteration";
  for (const auto& n : cs.names) os << ',' << n;
  os << '\n';
  std::string line;
  for (std::size_t c = 0; c < cs.n_chains(); ++c) {
    const auto& m = cs.chains[c];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      line = fmt::format("{},{}", c + 1, i + 1);
      for (Eigen::Index j = 0; j < m.cols(); ++j) fmt::format_to(std::back_inserter(line), ",{}", m(i, j));
      os << line << '\n';
    }
  }
}

ChainSet read_draws_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConsistencyError("draws file is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 3 || cols[0] != "chain" || cols[1] != "iteration") {
    throw ConsistencyError("draws file header must start with chain,iteration");
  }
  ChainSet cs;
  cs.names.assign(cols.begin() + 2, cols.end());
  std::vector<std::vector<std::vector<double>>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != cols.size()) throw ConsistencyError("ragged row in draws file");
    const auto chain = static_cast<std::size_t>(vals[0]);
    if (chain < 1) throw ConsistencyError("chain index must be >= 1");
    if (rows.size() < chain) rows.resize(chain);
    rows[chain - 1].emplace_back(vals.begin() + 2, vals.end());
  }
  for (const auto& r : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(cs.names.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = 0; j < r[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i][j];
    }
    cs.chains.push_back(std::move(m));
  }
  cs.validate();
  return cs;
}

}  // namespace bayescore::mcmc
