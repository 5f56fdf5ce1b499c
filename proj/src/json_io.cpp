#include "bayescore/json_io.hpp"

#include <set>

#include <fmt/format.h>

namespace bayescore::json_io {

using namespace dist;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SpecError(fmt::format("{}: {}", where, what));
}

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(where + "." + it.key(), "unknown field");
  }
}

double number(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing field");
  if (!it->is_number()) fail(where + "." + key, "expected a number");
  return it->get<double>();
}

std::int64_t integer(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing field");
  if (!it->is_number_integer()) fail(where + "." + key, "expected an integer");
  return it->get<std::int64_t>();
}

Eigen::VectorXd vector(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing field");
  if (!it->is_array()) fail(where + "." + key, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(it->size()));
  for (std::size_t i = 0; i < it->size(); ++i) {
    if (!(*it)[i].is_number()) fail(where + "." + key, "expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = (*it)[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing field");
  if (!it->is_array() || it->empty()) fail(where + "." + key, "expected a non-empty array of rows");
  const std::size_t rows = it->size();
  const std::size_t cols = (*it)[0].is_array() ? (*it)[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = (*it)[r];
    if (!row.is_array() || row.size() != cols) fail(where + "." + key, "rows must be arrays of equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) fail(where + "." + key, "expected numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return a;
}

template <class F>
Distribution wrap(F params, const std::string& where) {
  try {
    return Distribution(std::move(params));
  } catch (const ParameterError& e) {
    fail(where, e.what());
  }
}

}  // namespace

Json parse(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(where, fmt::format("invalid JSON ({})", e.what()));
  }
}

std::string family_key(const Distribution& d) {
  static const char* keys[] = {"bernoulli",     "binomial", "poisson",         "gauss",
                               "student_t",     "exponential", "pareto",       "beta",
                               "gamma",         "inverse_gamma", "cauchy",     "laplace",
                               "discrete_uniform", "uniform", "truncated_jeffreys", "negative_binomial",
                               "multivariate_gauss", "multivariate_t"};
  return keys[d.family().index()];
}

Distribution distribution_from_json(const Json& j, const std::string& where) {
  require_object(j, where);
  const auto fam_it = j.find("family");
  if (fam_it == j.end() || !fam_it->is_string()) fail(where + ".family", "missing distribution family");
  const std::string fam = fam_it->get<std::string>();
  auto fields = [&](std::set<std::string> allowed) {
    allowed.insert("family");
    reject_unknown(j, allowed, where);
  };
  if (fam == "bernoulli") {
    fields({"theta"});
    return wrap(Bernoulli{number(j, "theta", where)}, where);
  }
  if (fam == "binomial") {
    fields({"n", "theta"});
    return wrap(Binomial{integer(j, "n", where), number(j, "theta", where)}, where);
  }
  if (fam == "poisson") {
    fields({"theta"});
    return wrap(Poisson{number(j, "theta", where)}, where);
  }
  if (fam == "gauss") {
    fields({"mu", "sigma"});
    return wrap(Gauss{number(j, "mu", where), number(j, "sigma", where)}, where);
  }
  if (fam == "student_t") {
    fields({"mu", "sigma", "nu"});
    return wrap(NoncentralT{number(j, "mu", where), number(j, "sigma", where), number(j, "nu", where)}, where);
  }
  if (fam == "exponential") {
    fields({"theta"});
    return wrap(Exponential{number(j, "theta", where)}, where);
  }
  if (fam == "pareto") {
    fields({"theta", "y_min"});
    return wrap(Pareto{number(j, "theta", where), number(j, "y_min", where)}, where);
  }
  if (fam == "beta") {
    fields({"alpha", "beta"});
    return wrap(Beta{number(j, "alpha", where), number(j, "beta", where)}, where);
  }
  if (fam == "gamma") {
    fields({"alpha", "beta"});
    return wrap(Gamma{number(j, "alpha", where), number(j, "beta", where)}, where);
  }
  if (fam == "inverse_gamma") {
    fields({"alpha", "beta"});
    return wrap(InverseGamma{number(j, "alpha", where), number(j, "beta", where)}, where);
  }
  if (fam == "cauchy") {
    fields({"x0", "gamma"});
    return wrap(Cauchy{number(j, "x0", where), number(j, "gamma", where)}, where);
  }
  if (fam == "laplace") {
    fields({"mu", "b"});
    return wrap(Laplace{number(j, "mu", where), number(j, "b", where)}, where);
  }
  if (fam == "discrete_uniform") {
    fields({"k"});
    return wrap(DiscreteUniform{integer(j, "k", where)}, where);
  }
  if (fam == "uniform") {
    fields({"a", "b"});
    return wrap(ContinuousUniform{number(j, "a", where), number(j, "b", where)}, where);
  }
  if (fam == "truncated_jeffreys") {
    fields({"a", "b"});
    return wrap(TruncatedJeffreys{number(j, "a", where), number(j, "b", where)}, where);
  }
  if (fam == "negative_binomial") {
    fields({"n", "theta"});
    return wrap(NegativeBinomial{number(j, "n", where), number(j, "theta", where)}, where);
  }
  if (fam == "multivariate_gauss") {
    fields({"mu", "cov"});
    return wrap(MultivariateGauss{vector(j, "mu", where), matrix(j, "cov", where)}, where);
  }
  if (fam == "multivariate_t") {
    fields({"mu", "scale", "nu"});
    return wrap(MultivariateT{vector(j, "mu", where), matrix(j, "scale", where), number(j, "nu", where)}, where);
  }
  fail(where + ".family", fmt::format("unknown distribution family '{}'", fam));
}

Json distribution_to_json(const Distribution& d) {
  Json j;
  j["family"] = family_key(d);
  std::visit(
      [&](const auto& p) {
        using F = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<F, Bernoulli> || std::is_same_v<F, Poisson> || std::is_same_v<F, Exponential>) {
          j["theta"] = p.theta;
        } else if constexpr (std::is_same_v<F, Binomial> || std::is_same_v<F, NegativeBinomial>) {
          j["n"] = p.n;
          j["theta"] = p.theta;
        } else if constexpr (std::is_same_v<F, Gauss>) {
          j["mu"] = p.mu;
          j["sigma"] = p.sigma;
        } else if constexpr (std::is_same_v<F, NoncentralT>) {
          j["mu"] = p.mu;
          j["sigma"] = p.sigma;
          j["nu"] = p.nu;
        } else if constexpr (std::is_same_v<F, Pareto>) {
          j["theta"] = p.theta;
          j["y_min"] = p.y_min;
        } else if constexpr (std::is_same_v<F, Beta> || std::is_same_v<F, Gamma> || std::is_same_v<F, InverseGamma>) {
          j["alpha"] = p.alpha;
          j["beta"] = p.beta;
        } else if constexpr (std::is_same_v<F, Cauchy>) {
          j["x0"] = p.x0;
          j["gamma"] = p.gamma;
        } else if constexpr (std::is_same_v<F, Laplace>) {
          j["mu"] = p.mu;
          j["b"] = p.b;
        } else if constexpr (std::is_same_v<F, DiscreteUniform>) {
          j["k"] = p.k;
        } else if constexpr (std::is_same_v<F, ContinuousUniform> || std::is_same_v<F, TruncatedJeffreys>) {
          j["a"] = p.a;
          j["b"] = p.b;
        } else if constexpr (std::is_same_v<F, MultivariateGauss>) {
          j["mu"] = to_json(p.mu);
          j["cov"] = to_json(p.cov);
        } else {
          j["mu"] = to_json(p.mu);
          j["scale"] = to_json(p.scale);
          j["nu"] = p.nu;
        }
      },
      d.family());
  return j;
}

glm::PositivePrior positive_prior_from_json(const Json& j, const std::string& where) {
  require_object(j, where);
  Json body = j;
  glm::PriorOn on = glm::PriorOn::Value;
  if (const auto it = j.find("on"); it != j.end()) {
    const std::string s = it->is_string() ? it->get<std::string>() : "";
    if (s == "value" || s == "sd") {
      on = glm::PriorOn::Value;
    } else if (s == "variance") {
      on = glm::PriorOn::Variance;
    } else if (s == "precision") {
      on = glm::PriorOn::Precision;
    } else {
      fail(where + ".on", "expected \"value\", \"sd\", \"variance\" or \"precision\"");
    }
    body.erase("on");
  }
  return {distribution_from_json(body, where), on};
}

Json positive_prior_to_json(const glm::PositivePrior& p) {
  Json j = distribution_to_json(p.d);
  j["on"] = p.on == glm::PriorOn::Value ? "value" : (p.on == glm::PriorOn::Variance ? "variance" : "precision");
  return j;
}

glm::PriorSpec prior_from_json(const Json& j, const std::string& where) {
  require_object(j, where);
  const auto fam = j.find("family");
  if (fam != j.end() && fam->is_string() && *fam == "truncated_gauss") {
    reject_unknown(j, {"family", "mu0", "sigma0", "upper_bound"}, where);
    return glm::TruncatedGauss{number(j, "mu0", where), number(j, "sigma0", where), number(j, "upper_bound", where)};
  }
  if (fam != j.end() && fam->is_string() && *fam == "adaptive") {
    reject_unknown(j, {"family", "location", "scale", "centring"}, where);
    glm::Adaptive a;
    if (j.contains("location")) a.location = distribution_from_json(j["location"], where + ".location");
    if (j.contains("scale")) a.scale = positive_prior_from_json(j["scale"], where + ".scale");
    if (j.contains("centring")) {
      const std::string c = j["centring"].is_string() ? j["centring"].get<std::string>() : "";
      if (c == "auto") {
        a.centring = glm::Adaptive::Centring::Auto;
      } else if (c == "zeta") {
        a.centring = glm::Adaptive::Centring::Zeta;
      } else if (c == "separate_constant") {
        a.centring = glm::Adaptive::Centring::SeparateConstant;
      } else {
        fail(where + ".centring", "expected \"auto\", \"zeta\" or \"separate_constant\"");
      }
    }
    return a;
  }
  return glm::Fixed{distribution_from_json(j, where)};
}

Json prior_to_json(const glm::PriorSpec& p) {
  if (const auto* f = std::get_if<glm::Fixed>(&p)) return distribution_to_json(f->d);
  if (const auto* t = std::get_if<glm::TruncatedGauss>(&p)) {
    Json j;
    j["family"] = "truncated_gauss";
    j["mu0"] = t->mu0;
    j["sigma0"] = t->sigma0;
    j["upper_bound"] = t->upper_bound;
    return j;
  }
  const auto& a = std::get<glm::Adaptive>(p);
  Json j;
  j["family"] = "adaptive";
  j["location"] = distribution_to_json(a.location);
  j["scale"] = positive_prior_to_json(a.scale);
  j["centring"] = a.centring == glm::Adaptive::Centring::Auto
                      ? "auto"
                      : (a.centring == glm::Adaptive::Centring::Zeta ? "zeta" : "separate_constant");
  return j;
}

std::vector<std::string> sampler_from_json(const Json& j, mcmc::SamplerConfig& config) {
  const std::string where = "sampler";
  require_object(j, where);
  reject_unknown(j, {"algorithm", "chains", "iter", "warmup", "thin", "seed", "step_size", "n_leapfrog", "step_scale"},
                 where);
  std::vector<std::string> present;
  auto count = [&](const char* key) {
    const auto v = integer(j, key, where);
    if (v < 0) fail(where + "." + key, "must be non-negative");
    present.emplace_back(key);
    return static_cast<std::size_t>(v);
  };
  if (j.contains("chains")) config.n_chains = count("chains");
  if (j.contains("iter")) config.n_iter = count("iter");
  if (j.contains("warmup")) config.n_warmup = count("warmup");
  if (j.contains("thin")) config.thin = count("thin");
  if (j.contains("seed")) config.seed = count("seed");
  if (j.contains("algorithm")) {
    const std::string a = j["algorithm"].is_string() ? j["algorithm"].get<std::string>() : "";
    if (a == "mh") {
      config.algorithm = mcmc::MH{};
    } else if (a == "gibbs") {
      config.algorithm = mcmc::Gibbs{};
    } else if (a == "hmc") {
      config.algorithm = mcmc::HMC{};
    } else if (a != "auto") {
      fail(where + ".algorithm", "expected \"auto\", \"mh\", \"gibbs\" or \"hmc\"");
    }
    if (a != "auto") present.emplace_back("algorithm");
  }
  if (auto* h = std::get_if<mcmc::HMC>(&config.algorithm)) {
    if (j.contains("step_size")) h->step_size = number(j, "step_size", where);
    if (j.contains("n_leapfrog")) h->n_leapfrog = static_cast<int>(integer(j, "n_leapfrog", where));
  }
  if (auto* m = std::get_if<mcmc::MH>(&config.algorithm); m && j.contains("step_scale")) {
    const auto& s = j["step_scale"];
    if (s.is_number()) {
      m->step_scale = {s.get<double>()};
    } else {
      const auto v = vector(j, "step_scale", where);
      m->step_scale.assign(v.data(), v.data() + v.size());
    }
  }
  for (const char* k : {"step_size", "n_leapfrog", "step_scale"}) {
    if (j.contains(k)) present.emplace_back(k);
  }
  return present;
}

Json sampler_to_json(const mcmc::SamplerConfig& c) {
  Json j;
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, mcmc::MH>) {
          j["algorithm"] = "mh";
          j["step_scale"] = a.step_scale;
        } else if constexpr (std::is_same_v<A, mcmc::Gibbs>) {
          j["algorithm"] = "gibbs";
        } else {
          j["algorithm"] = "hmc";
          j["step_size"] = a.step_size;
          j["n_leapfrog"] = a.n_leapfrog;
        }
      },
      c.algorithm);
  j["chains"] = c.n_chains;
  j["iter"] = c.n_iter;
  j["warmup"] = c.n_warmup;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  return j;
}

}  // namespace bayescore::json_io

namespace bayescore::glm {

using json_io::Json;

namespace {

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw SpecError(fmt::format("{}{}: missing field", where, key));
  if (!it->is_string() || it->get<std::string>().empty()) {
    throw SpecError(fmt::format("{}{}: expected a non-empty string", where, key));
  }
  return it->get<std::string>();
}

bool bool_field(const Json& j, const char* key, const std::string& where) {
  const auto& v = j[key];
  if (!v.is_boolean()) throw SpecError(fmt::format("{}.{}: expected true or false", where, key));
  return v.get<bool>();
}

}  // namespace

ModelDocument parse_model_document(const std::string& json_text) {
  const Json doc = json_io::parse(json_text, "model");
  if (!doc.is_object()) throw SpecError("model: expected a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    static const std::set<std::string> allowed{"likelihood", "link",   "response", "predictors",
                                               "group",      "priors", "sampler",  "standardize"};
    if (!allowed.count(it.key())) throw SpecError(fmt::format("{}: unknown field", it.key()));
  }
  ModelDocument out;
  if (!doc.contains("likelihood")) throw SpecError("likelihood: missing field");
  Json lik = doc["likelihood"];
  if (lik.is_string()) lik = Json{{"family", lik}};
  if (!lik.is_object() || !lik.contains("family") || !lik["family"].is_string()) {
    throw SpecError("likelihood: expected a family name or an object with \"family\"");
  }
  const std::string fam = lik["family"].get<std::string>();
  const std::string lw = "likelihood";
  auto options = [&](std::set<std::string> allowed) {
    allowed.insert("family");
    for (auto it = lik.begin(); it != lik.end(); ++it) {
      if (!allowed.count(it.key())) throw SpecError(fmt::format("likelihood.{}: unknown field", it.key()));
    }
  };
  if (fam == "gauss") {
    options({"heteroscedastic"});
    GaussLik g;
    if (lik.contains("heteroscedastic")) g.homoscedastic = !bool_field(lik, "heteroscedastic", lw);
    out.spec.likelihood = g;
  } else if (fam == "student_t") {
    options({"nu_prior"});
    StudentTLik t;
    if (lik.contains("nu_prior")) t.nu_prior = json_io::positive_prior_from_json(lik["nu_prior"], "likelihood.nu_prior");
    out.spec.likelihood = t;
  } else if (fam == "bernoulli") {
    options({});
    out.spec.likelihood = BernoulliLik{};
  } else if (fam == "binomial") {
    options({"trials"});
    out.spec.likelihood = BinomialLik{};
    if (!lik.contains("trials")) throw SpecError("likelihood.trials: missing field");
    const auto& t = lik["trials"];
    if (t.is_string()) {
      out.trials_column = t.get<std::string>();
    } else if (t.is_number_integer() && t.get<std::int64_t>() >= 0) {
      out.trials_constant = t.get<std::int64_t>();
    } else {
      throw SpecError("likelihood.trials: expected a column name or a non-negative integer");
    }
  } else if (fam == "poisson" || fam == "negative_binomial") {
    options(fam == "poisson" ? std::set<std::string>{"exposure"} : std::set<std::string>{"size_prior"});
    if (lik.contains("exposure")) out.exposure_column = string_field(lik, "exposure", "likelihood.");
    if (fam == "poisson") {
      out.spec.likelihood = PoissonLik{};
    } else {
      NegativeBinomialLik nb;
      if (lik.contains("size_prior")) {
        nb.size_prior = json_io::positive_prior_from_json(lik["size_prior"], "likelihood.size_prior");
      }
      out.spec.likelihood = nb;
    }
  } else if (fam == "exponential") {
    options({});
    out.spec.likelihood = ExponentialLik{};
  } else if (fam == "anova") {
    options({"heteroscedastic", "nu_prior", "shape_rate_prior"});
    AnovaCellMeansLik a;
    if (lik.contains("heteroscedastic")) a.heteroscedastic = bool_field(lik, "heteroscedastic", lw);
    if (lik.contains("nu_prior")) a.nu_prior = json_io::positive_prior_from_json(lik["nu_prior"], "likelihood.nu_prior");
    if (lik.contains("shape_rate_prior")) {
      a.shape_rate_prior = json_io::distribution_from_json(lik["shape_rate_prior"], "likelihood.shape_rate_prior");
    }
    out.spec.likelihood = a;
  } else {
    throw SpecError(fmt::format("likelihood: unknown likelihood '{}'", fam));
  }

  const Link default_link = fam == "bernoulli" || fam == "binomial"       ? Link::Logistic
                            : fam == "poisson" || fam == "negative_binomial" ? Link::NaturalExp
                            : fam == "exponential"                         ? Link::NegativeInverse
                                                                           : Link::Identity;
  out.spec.link = doc.contains("link") ? parse_link(string_field(doc, "link", "")) : default_link;
  out.response = string_field(doc, "response", "");
  if (doc.contains("predictors")) {
    const auto& p = doc["predictors"];
    if (!p.is_array()) throw SpecError("predictors: expected an array of column names");
    for (const auto& name : p) {
      if (!name.is_string()) throw SpecError("predictors: expected an array of column names");
      out.predictors.push_back(name.get<std::string>());
    }
  }
  if (doc.contains("group")) out.group = string_field(doc, "group", "");
  if (doc.contains("standardize")) out.spec.standardize = bool_field(doc, "standardize", "model");

  if (doc.contains("priors")) {
    const auto& pr = doc["priors"];
    if (!pr.is_object()) throw SpecError("priors: expected an object");
    for (auto it = pr.begin(); it != pr.end(); ++it) {
      const std::string& key = it.key();
      const std::string where = "priors." + key;
      if (key == "intercept") {
        out.spec.intercept_prior = json_io::prior_from_json(*it, where);
      } else if (key == "slopes") {
        const bool per_name = it->is_object() && !it->contains("family");
        if (!per_name) {
          out.spec.slope_priors = {json_io::prior_from_json(*it, where)};
          continue;
        }
        for (auto s = it->begin(); s != it->end(); ++s) {
          if (std::find(out.predictors.begin(), out.predictors.end(), s.key()) == out.predictors.end()) {
            throw SpecError(fmt::format("{}.{}: not a predictor", where, s.key()));
          }
        }
        const PriorSpec fallback = fam == "exponential"   ? PriorSpec{TruncatedGauss{0.0, 10.0, 0.0}}
                                   : out.spec.standardize ? PriorSpec{Fixed{dist::Gauss{0.0, 1.0}}}
                                                          : PriorSpec{Fixed{dist::Gauss{0.0, 10.0}}};
        for (const auto& name : out.predictors) {
          out.spec.slope_priors.push_back(it->contains(name) ? json_io::prior_from_json((*it)[name], where + "." + name)
                                                             : fallback);
        }
      } else if (key == "group") {
        out.spec.group_prior = json_io::prior_from_json(*it, where);
      } else if (key == "dispersion") {
        out.spec.dispersion_prior = json_io::positive_prior_from_json(*it, where);
      } else {
        throw SpecError(fmt::format("{}: unknown field", where));
      }
    }
  }
  if (doc.contains("sampler")) out.sampler_fields = json_io::sampler_from_json(doc["sampler"], out.sampler);
  out.spec.validate();
  return out;
}

}  // namespace bayescore::glm
