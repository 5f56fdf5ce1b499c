#include "bayescore/decision.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "bayescore/json_io.hpp"

namespace bayescore::decision {

namespace {

constexpr double kSumTolerance = 1e-12;

// Magnitude below which EU differences count as indifference.
double indifference_scale(const DecisionMatrix& m) {
  double u = 0.0;
  for (double v : m.utilities) u = std::max(u, std::abs(v));
  return 1e-12 * std::max(u, 1.0);
}

int sign(double x, double eps) { return x > eps ? 1 : (x < -eps ? -1 : 0); }

}  // namespace

Lottery::Lottery(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ParameterError("lottery over an empty outcome set");
  double s = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError(fmt::format("lottery probability {} is invalid", p));
    s += p;
  }
  if (std::abs(s - 1.0) > kSumTolerance) throw ParameterError(fmt::format("lottery sums to {}, not 1", s));
}

Lottery Lottery::sure(std::size_t index, std::size_t n_outcomes) {
  if (index >= n_outcomes) throw DimensionError(fmt::format("outcome {} of {}", index, n_outcomes));
  std::vector<double> p(n_outcomes, 0.0);
  p[index] = 1.0;
  return Lottery(std::move(p));
}

Lottery mix(const Lottery& p, const Lottery& q, double alpha) {
  if (p.size() != q.size()) throw DimensionError(fmt::format("mixing lotteries over {} and {} outcomes", p.size(), q.size()));
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError(fmt::format("mixing weight {} outside (0, 1)", alpha));
  std::vector<double> r(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = alpha * p[i] + (1.0 - alpha) * q[i];
    s += r[i];
  }
  for (double& v : r) v /= s;
  return Lottery(std::move(r));
}

Act mix_acts(const Act& f, const Act& g, double alpha) {
  if (f.size() != g.size()) throw DimensionError(fmt::format("mixing acts over {} and {} states", f.size(), g.size()));
  Act r;
  r.reserve(f.size());
  for (std::size_t w = 0; w < f.size(); ++w) r.push_back(mix(f[w], g[w], alpha));
  return r;
}

void DecisionMatrix::validate() const {
  const std::size_t n = states.size(), k = acts.size(), x = outcomes.size();
  if (k == 0) throw ParameterError("decision matrix has no acts");
  if (n == 0) throw ParameterError("decision matrix has no states");
  if (state_prior.size() != n) throw DimensionError(fmt::format("prior has {} entries for {} states", state_prior.size(), n));
  if (utilities.size() != x) throw DimensionError(fmt::format("{} utilities for {} outcomes", utilities.size(), x));
  for (double u : utilities) {
    if (!std::isfinite(u)) throw ParameterError("utilities must be finite");
  }
  if (cells.size() != k) throw DimensionError(fmt::format("{} act rows for {} acts", cells.size(), k));
  for (std::size_t j = 0; j < k; ++j) {
    if (cells[j].size() != n) {
      throw DimensionError(fmt::format("act '{}' has {} lotteries for {} states", acts[j], cells[j].size(), n));
    }
    for (const auto& l : cells[j]) {
      if (l.size() != x) throw DimensionError(fmt::format("act '{}' has a lottery over {} outcomes, expected {}", acts[j], l.size(), x));
    }
  }
  if (std::set<std::string>(acts.begin(), acts.end()).size() != k) throw ParameterError("duplicate act label");
  if (std::set<std::string>(states.begin(), states.end()).size() != n) throw ParameterError("duplicate state label");
}

std::size_t DecisionMatrix::act_index(const std::string& act) const {
  const auto it = std::find(acts.begin(), acts.end(), act);
  if (it == acts.end()) throw UnknownActError(fmt::format("unknown act '{}'", act));
  return static_cast<std::size_t>(it - acts.begin());
}

double lottery_utility(const DecisionMatrix& m, const Lottery& p) {
  if (p.size() != m.utilities.size()) throw DimensionError(fmt::format("lottery over {} outcomes, expected {}", p.size(), m.utilities.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += m.utilities[i] * p[i];
  return s;
}

double expected_utility(const DecisionMatrix& m, const Act& f) {
  if (f.size() != m.state_prior.size()) throw DimensionError(fmt::format("act over {} states, expected {}", f.size(), m.state_prior.size()));
  double s = 0.0;
  for (std::size_t w = 0; w < f.size(); ++w) s += lottery_utility(m, f[w]) * m.state_prior[w];
  return s;
}

double expected_utility(const DecisionMatrix& m, const std::string& act) {
  return expected_utility(m, m.cells[m.act_index(act)]);
}

Ranking best_act(const DecisionMatrix& m) {
  m.validate();
  std::vector<RankedAct> r;
  r.reserve(m.acts.size());
  for (std::size_t j = 0; j < m.acts.size(); ++j) r.push_back({m.acts[j], expected_utility(m, m.cells[j])});
  std::stable_sort(r.begin(), r.end(), [](const RankedAct& a, const RankedAct& b) { return a.eu > b.eu; });
  return {r.front().act, r.front().eu, r};
}

std::string to_string(AxiomStatus s) {
  switch (s) {
    case AxiomStatus::Pass: return "pass";
    case AxiomStatus::Fail: return "fail";
    case AxiomStatus::NotChecked: return "not checked";
  }
  return "?";
}

bool AxiomReport::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const AxiomCheck& c) { return c.status == AxiomStatus::Fail; });
}

AxiomReport check_axioms(const DecisionMatrix& m, std::size_t samples, Rng& rng) {
  m.validate();
  const double eps = indifference_scale(m);
  const std::size_t k = m.acts.size(), n = m.states.size();
  auto pick = [&](std::size_t size) { return static_cast<std::size_t>(rng() % size); };
  auto weight = [&] { return 0.01 + 0.98 * rng.uniform(); };

  struct Candidate {
    std::string name;
    Act act;
    double eu;
    std::vector<double> state_eu;
  };
  std::vector<Candidate> pool;
  auto add = [&](std::string name, Act act) {
    std::vector<double> se(n);
    for (std::size_t w = 0; w < n; ++w) se[w] = lottery_utility(m, act[w]);
    const double eu = expected_utility(m, act);
    pool.push_back({std::move(name), std::move(act), eu, std::move(se)});
  };
  for (std::size_t j = 0; j < k; ++j) add(m.acts[j], m.cells[j]);
  for (std::size_t s = 0; s < samples && k > 1; ++s) {
    const std::size_t a = pick(k), b = pick(k);
    const double alpha = weight();
    add(fmt::format("{:.4f} {} + {:.4f} {}", alpha, m.acts[a], 1.0 - alpha, m.acts[b]),
        mix_acts(m.cells[a], m.cells[b], alpha));
  }
  const std::size_t p = pool.size();
  auto prefers = [&](std::size_t a, std::size_t b) { return pool[a].eu >= pool[b].eu; };
  const std::size_t trials = std::max<std::size_t>(samples, 1);

  AxiomCheck completeness{"completeness", AxiomStatus::Pass, 0, {}};
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      ++completeness.cases;
      if (!prefers(a, b) && !prefers(b, a) && completeness.status == AxiomStatus::Pass) {
        completeness.status = AxiomStatus::Fail;
        completeness.counterexample = fmt::format("'{}' and '{}' are incomparable", pool[a].name, pool[b].name);
      }
    }
  }

  AxiomCheck transitivity{"transitivity", AxiomStatus::Pass, 0, {}};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t a = pick(p), b = pick(p), c = pick(p);
    ++transitivity.cases;
    if (prefers(a, b) && prefers(b, c) && !prefers(a, c) && transitivity.status == AxiomStatus::Pass) {
      transitivity.status = AxiomStatus::Fail;
      transitivity.counterexample = fmt::format("'{}' >= '{}' >= '{}' but not '{}' >= '{}'", pool[a].name,
                                                pool[b].name, pool[c].name, pool[a].name, pool[c].name);
    }
  }

  AxiomCheck independence{"independence", AxiomStatus::Pass, 0, {}};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t f = pick(p), g = pick(p), h = pick(p);
    const double alpha = weight();
    ++independence.cases;
    const double lhs = expected_utility(m, mix_acts(pool[f].act, pool[h].act, alpha)) -
                       expected_utility(m, mix_acts(pool[g].act, pool[h].act, alpha));
    const double rhs = pool[f].eu - pool[g].eu;
    if (sign(lhs, eps) != sign(rhs, eps) && std::abs(lhs - alpha * rhs) > eps &&
        independence.status == AxiomStatus::Pass) {
      independence.status = AxiomStatus::Fail;
      independence.counterexample = fmt::format("mixing '{}' and '{}' with '{}' at {} changes the preference",
                                                pool[f].name, pool[g].name, pool[h].name, alpha);
    }
  }

  AxiomCheck monotonicity{"monotonicity", AxiomStatus::Pass, 0, {}};
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      bool dominates = true;
      for (std::size_t w = 0; w < n && dominates; ++w) dominates = pool[a].state_eu[w] >= pool[b].state_eu[w];
      if (!dominates) continue;
      ++monotonicity.cases;
      if (pool[a].eu < pool[b].eu - eps && monotonicity.status == AxiomStatus::Pass) {
        monotonicity.status = AxiomStatus::Fail;
        monotonicity.counterexample =
            fmt::format("'{}' dominates '{}' state by state but has lower EU", pool[a].name, pool[b].name);
      }
    }
  }

  AxiomCheck continuity{"continuity", AxiomStatus::NotChecked, 0, {}};
  return {{completeness, transitivity, independence, monotonicity, continuity}};
}

DecisionMatrix with_updated_prior(const DecisionMatrix& m, const std::vector<double>& log_likelihood) {
  if (log_likelihood.size() != m.states.size()) {
    throw DimensionError(fmt::format("{} log-likelihoods for {} states", log_likelihood.size(), m.states.size()));
  }
  DecisionMatrix r = m;
  r.state_prior = prob::bayes_grid(m.state_prior, log_likelihood);
  return r;
}

namespace {

using json_io::Json;

std::vector<std::string> string_list(const Json& j, const std::string& field) {
  if (!j.contains(field) || !j.at(field).is_array()) throw SpecError(fmt::format("decision field '{}' must be an array", field));
  std::vector<std::string> out;
  for (const auto& v : j.at(field)) {
    if (!v.is_string()) throw SpecError(fmt::format("decision field '{}' must hold strings", field));
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<double> number_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw SpecError(fmt::format("decision field '{}' must be an array of numbers", where));
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw SpecError(fmt::format("decision field '{}' must hold numbers", where));
    out.push_back(v.get<double>());
  }
  return out;
}

Json number_array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

DecisionMatrix parse_decision_document(const std::string& json_text) {
  const Json j = json_io::parse(json_text, "decision file");
  if (!j.is_object()) throw SpecError("decision file must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known = {"states", "prior", "outcomes", "utilities", "acts"};
    if (!known.count(key)) throw SpecError(fmt::format("unknown decision field '{}'", key));
  }
  for (const char* f : {"prior", "utilities", "acts"}) {
    if (!j.contains(f)) throw SpecError(fmt::format("decision field '{}' is missing", f));
  }
  DecisionMatrix m{string_list(j, "states"), {}, prob::DiscretePrior::uniform(1), {}, string_list(j, "outcomes"),
                   number_list(j.at("utilities"), "utilities")};
  try {
    m.state_prior = prob::DiscretePrior(number_list(j.at("prior"), "prior"), m.states);
  } catch (const ParameterError& e) {
    throw ParameterError(fmt::format("decision field 'prior': {}", e.what()));
  }
  if (!j.at("acts").is_object()) throw SpecError("decision field 'acts' must be an object");
  for (const auto& [name, rows] : j.at("acts").items()) {
    const std::string where = fmt::format("acts.{}", name);
    if (!rows.is_array()) throw SpecError(fmt::format("decision field '{}' must be an array of lotteries", where));
    Act act;
    for (std::size_t w = 0; w < rows.size(); ++w) {
      try {
        act.emplace_back(number_list(rows[w], where));
      } catch (const ParameterError& e) {
        throw ParameterError(fmt::format("decision field '{}' state {}: {}", where, w + 1, e.what()));
      }
    }
    m.acts.push_back(name);
    m.cells.push_back(std::move(act));
  }
  m.validate();
  return m;
}

std::string decision_to_json(const DecisionMatrix& m) {
  Json j;
  j["states"] = m.states;
  j["prior"] = number_array(m.state_prior.probs());
  j["outcomes"] = m.outcomes;
  j["utilities"] = number_array(m.utilities);
  Json acts = Json::object();
  for (std::size_t a = 0; a < m.acts.size(); ++a) {
    Json rows = Json::array();
    for (const auto& l : m.cells[a]) rows.push_back(number_array(l.probs()));
    acts[m.acts[a]] = rows;
  }
  j["acts"] = acts;
  return j.dump(2);
}

std::string ranking_to_json(const Ranking& r) {
  Json j;
  j["best_act"] = r.act;
  j["expected_utility"] = r.eu;
  Json rows = Json::array();
  for (const auto& a : r.full_ranking) rows.push_back(Json{{"act", a.act}, {"expected_utility", a.eu}});
  j["ranking"] = rows;
  return j.dump(2);
}

std::string axiom_report_to_json(const AxiomReport& r) {
  Json j;
  j["passed"] = r.passed();
  Json rows = Json::array();
  for (const auto& c : r.checks) {
    Json row{{"axiom", c.axiom}, {"status", to_string(c.status)}, {"cases", c.cases}};
    if (!c.counterexample.empty()) row["counterexample"] = c.counterexample;
    rows.push_back(row);
  }
  j["checks"] = rows;
  return j.dump(2);
}

}  // namespace bayescore::decision
