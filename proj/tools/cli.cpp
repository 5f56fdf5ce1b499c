#include "bayescore/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "bayescore/decision.hpp"
#include "bayescore/dist.hpp"
#include "bayescore/evidence.hpp"
#include "bayescore/glm.hpp"
#include "bayescore/json_io.hpp"
#include "bayescore/predictive.hpp"
#include "bayescore/sampler.hpp"

namespace bayescore::cli {

namespace fs = std::filesystem;
using json_io::Json;

bool Dataset::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::size_t Dataset::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InputError(fmt::format("column '{}' not found", name));
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> Dataset::numeric(const std::string& name) const {
  const auto& col = columns[index_of(name)];
  std::vector<double> out(col.size());
  for (std::size_t r = 0; r < col.size(); ++r) {
    const auto& s = col[r];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out[r]);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(out[r])) {
      throw InputError(fmt::format("column '{}' row {}: '{}' is not a number", name, r + 1, s));
    }
  }
  return out;
}

const std::vector<std::string>& Dataset::labels(const std::string& name) const { return columns[index_of(name)]; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

// Splits the whole input into records of fields; quoted fields may hold commas, quotes and newlines.
std::vector<std::vector<std::string>> csv_records(std::istream& is, const std::string& where) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, was_quoted = false, any = false;
  auto end_field = [&] {
    rec.push_back(was_quoted ? field : trim(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(rec.size() == 1 && rec[0].empty())) records.push_back(std::move(rec));
    rec.clear();
    any = false;
  };
  char c;
  while (is.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = was_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
      continue;
    } else if (c != '\r') {
      field += c;
    }
    any = true;
  }
  if (quoted) throw InputError(fmt::format("{}: unterminated quoted field", where));
  if (any || !field.empty() || !rec.empty()) end_record();
  return records;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

}  // namespace

Dataset parse_csv(std::istream& is, const std::string& where, bool drop_na) {
  auto records = csv_records(is, where);
  if (records.empty()) throw InputError(fmt::format("{}: missing header row", where));
  Dataset d;
  d.names = records[0];
  for (std::size_t j = 0; j < d.names.size(); ++j) {
    if (d.names[j].empty()) throw InputError(fmt::format("{}: header column {} is empty", where, j + 1));
    if (std::count(d.names.begin(), d.names.end(), d.names[j]) > 1) {
      throw InputError(fmt::format("{}: duplicate column '{}'", where, d.names[j]));
    }
  }
  d.columns.assign(d.names.size(), {});
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != d.names.size()) {
      throw InputError(fmt::format("{}: row {} has {} cells, header has {}", where, r, rec.size(), d.names.size()));
    }
    const auto missing = std::find_if(rec.begin(), rec.end(), is_missing);
    if (missing != rec.end()) {
      if (drop_na) continue;
      throw InputError(fmt::format("{}: row {} column '{}' is missing (use --drop-na to delete such rows)", where, r,
                                   d.names[static_cast<std::size_t>(missing - rec.begin())]));
    }
    for (std::size_t j = 0; j < rec.size(); ++j) d.columns[j].push_back(rec[j]);
  }
  return d;
}

Dataset read_csv(const std::string& path, bool drop_na) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  return parse_csv(in, path, drop_na);
}

void write_csv(const Dataset& data, std::ostream& os) {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && trim(s) == s) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (std::size_t j = 0; j < data.names.size(); ++j) os << (j ? "," : "") << cell(data.names[j]);
  os << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t j = 0; j < data.columns.size(); ++j) os << (j ? "," : "") << cell(data.columns[j][r]);
    os << '\n';
  }
}

std::string response_hash(const std::vector<double>& y) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : y) {
    for (char c : fmt::format("{};", v)) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

mcmc::HMC tune_hmc(const mcmc::LogTarget& target, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(target.dimension());
  if (!target.gradient) throw MissingConditionalError("HMC needs a gradient");
  Eigen::VectorXd x = target.initial ? target.initial(rng) : Eigen::VectorXd::Zero(d);
  auto hessian = [&](const Eigen::VectorXd& at) {
    Eigen::MatrixXd h(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double e = 1e-5 * (1.0 + std::abs(at(i)));
      Eigen::VectorXd hi = at, lo = at;
      hi(i) += e;
      lo(i) -= e;
      h.col(i) = (target.gradient(hi) - target.gradient(lo)) / (2.0 * e);
    }
    return Eigen::MatrixXd(0.5 * (h + h.transpose()));
  };
  double f = target.log_density(x);
  for (int it = 0; it < 200 && std::isfinite(f); ++it) {
    const Eigen::VectorXd g = target.gradient(x);
    if (g.lpNorm<Eigen::Infinity>() < 1e-8) break;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(-hessian(x));
    Eigen::VectorXd dir = g;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) dir = ldlt.solve(g);
    double t = 1.0, trial = target.log_density(x + dir);
    while (!(trial > f) && t > 1e-10) {
      t *= 0.5;
      trial = target.log_density(x + t * dir);
    }
    if (t <= 1e-10) break;
    x += t * dir;
    if (trial - f < 1e-12 * (1.0 + std::abs(f))) {
      f = trial;
      break;
    }
    f = trial;
  }
  mcmc::HMC h;
  if (!std::isfinite(f)) return h;
  const Eigen::MatrixXd neg = -hessian(x);
  Eigen::VectorXd var(d);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(neg);
  if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
    var = ldlt.solve(Eigen::MatrixXd::Identity(d, d)).diagonal();
  } else {
    var = neg.diagonal().cwiseAbs().cwiseMax(1e-12).cwiseInverse();
  }
  if (!var.allFinite() || (var.array() <= 0.0).any()) return h;
  // The stability limit of leapfrog is set by the stiffest direction of the Hessian.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(neg, Eigen::EigenvaluesOnly);
  const double stiff = eig.info() == Eigen::Success ? eig.eigenvalues().maxCoeff() : 0.0;
  const double min_sd = stiff > 0.0 ? std::min(std::sqrt(var.minCoeff()), 1.0 / std::sqrt(stiff)) : std::sqrt(var.minCoeff());
  const double max_sd = std::sqrt(var.maxCoeff());
  h.step_size = 0.4 * min_sd;
  h.n_leapfrog = static_cast<int>(std::clamp(std::ceil(1.5 * max_sd / h.step_size), 10.0, 300.0));
  return h;
}

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("writing '{}' failed", path.string()));
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// Model inputs assembled from a document and a dataset.
struct Inputs {
  glm::ModelSpec spec;
  Eigen::VectorXd y;
  glm::DesignMatrix x;
  std::optional<glm::Groups> groups;
};

std::vector<std::int64_t> counts(const Dataset& data, const std::string& column) {
  std::vector<std::int64_t> out;
  const auto v = data.numeric(column);
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (v[r] != std::floor(v[r]) || v[r] < 0.0) {
      throw InputError(fmt::format("column '{}' row {}: expected a non-negative integer", column, r + 1));
    }
    out.push_back(static_cast<std::int64_t>(v[r]));
  }
  return out;
}

glm::DesignMatrix design_of(const glm::ModelDocument& doc, const Dataset& data) {
  const auto n = data.rows();
  if (doc.predictors.empty()) return glm::DesignMatrix::intercept_only(n);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(doc.predictors.size()));
  for (std::size_t j = 0; j < doc.predictors.size(); ++j) {
    const auto col = data.numeric(doc.predictors[j]);
    for (std::size_t r = 0; r < n; ++r) p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = col[r];
  }
  return glm::DesignMatrix::from_predictors(p, doc.predictors);
}

Inputs inputs_of(const glm::ModelDocument& doc, const Dataset& data) {
  if (data.rows() == 0) throw EmptyDataError("data has no rows");
  Inputs in{doc.spec, {}, design_of(doc, data), std::nullopt};
  const auto y = data.numeric(doc.response);
  in.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  if (doc.group) in.groups = glm::Groups::from_labels(data.labels(*doc.group));
  if (auto* b = std::get_if<glm::BinomialLik>(&in.spec.likelihood)) {
    b->trials = doc.trials_column ? counts(data, *doc.trials_column)
                                  : std::vector<std::int64_t>(data.rows(), doc.trials_constant.value_or(1));
  }
  if (auto* p = std::get_if<glm::PoissonLik>(&in.spec.likelihood); p && doc.exposure_column) {
    p->exposure = data.numeric(*doc.exposure_column);
  }
  return in;
}

glm::CompiledModel compile_inputs(const Inputs& in) { return glm::compile(in.spec, in.y, in.x, in.groups); }

std::string algorithm_name(const mcmc::Algorithm& a) {
  return std::holds_alternative<mcmc::MH>(a) ? "mh" : std::holds_alternative<mcmc::Gibbs>(a) ? "gibbs" : "hmc";
}

Json summaries_json(const std::vector<mcmc::ParamSummary>& rows) {
  Json out = Json::array();
  for (const auto& s : rows) {
    Json j;
    j["name"] = s.name;
    j["mean"] = s.mean;
    j["sd"] = s.sd;
    j["q025"] = s.q025;
    j["median"] = s.median;
    j["q975"] = s.q975;
    j["hpd_low"] = s.hpd_low;
    j["hpd_high"] = s.hpd_high;
    j["ess"] = s.ess;
    j["rhat"] = s.rhat ? Json(*s.rhat) : Json(nullptr);
    j["mcse"] = s.mcse;
    out.push_back(j);
  }
  return out;
}

mcmc::ChainSet derived_chains(const mcmc::ChainSet& cs, const glm::CompiledModel& m) {
  mcmc::ChainSet out = cs;
  out.names = m.derived_names();
  for (std::size_t c = 0; c < cs.n_chains(); ++c) {
    Eigen::MatrixXd d(cs.chains[c].rows(), static_cast<Eigen::Index>(out.names.size()));
    for (Eigen::Index r = 0; r < d.rows(); ++r) d.row(r) = m.derived(cs.chains[c].row(r).transpose()).transpose();
    out.chains[c] = d;
  }
  return out;
}

struct FitOptions {
  std::string data, model, out;
  std::optional<std::size_t> chains, iter, warmup, thin;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::optional<double> step_size;
  std::optional<int> leapfrog;
  bool drop_na = false;
};

int cmd_fit(const FitOptions& o, std::ostream& out) {
  const std::string model_text = read_text(o.model);
  const auto doc = glm::parse_model_document(model_text);
  const Dataset data = read_csv(o.data, o.drop_na);
  const Inputs in = inputs_of(doc, data);
  const auto model = compile_inputs(in);

  auto has = [&](const char* f) { return std::count(doc.sampler_fields.begin(), doc.sampler_fields.end(), f) > 0; };
  mcmc::SamplerConfig cfg = doc.sampler;
  if (o.chains) cfg.n_chains = *o.chains;
  if (o.iter) cfg.n_iter = *o.iter;
  if (o.warmup) cfg.n_warmup = *o.warmup;
  if (o.thin) cfg.thin = *o.thin;
  cfg.seed = o.seed ? *o.seed : has("seed") ? doc.sampler.seed : entropy_seed();

  const Json raw = json_io::parse(model_text, "model");
  const Json sampler_block = raw.contains("sampler") ? raw["sampler"] : Json::object();
  std::string algo = !o.algorithm.empty() ? o.algorithm : has("algorithm") ? algorithm_name(cfg.algorithm) : "auto";
  if (algo == "auto") algo = model.has_full_conditionals() ? "gibbs" : "hmc";
  Json tuning = nullptr;
  if (algo == "gibbs") {
    cfg.algorithm = mcmc::Gibbs{};
  } else if (algo == "mh") {
    if (!std::holds_alternative<mcmc::MH>(cfg.algorithm)) cfg.algorithm = mcmc::MH{};
  } else if (algo == "hmc") {
    std::optional<double> step = o.step_size;
    std::optional<int> steps = o.leapfrog;
    if (!step && sampler_block.contains("step_size")) step = sampler_block["step_size"].get<double>();
    if (!steps && sampler_block.contains("n_leapfrog")) steps = sampler_block["n_leapfrog"].get<int>();
    mcmc::HMC h;
    if (!step || !steps) {
      Rng tune_rng(cfg.seed, 0x7475'6e65);
      h = tune_hmc(model.target(), tune_rng);
      tuning = Json{{"step_size", h.step_size}, {"n_leapfrog", h.n_leapfrog}};
    }
    if (step) h.step_size = *step;
    if (steps) h.n_leapfrog = *steps;
    cfg.algorithm = h;
  } else {
    throw InputError(fmt::format("--algorithm: expected auto, mh, gibbs or hmc, got '{}'", algo));
  }
  cfg.validate();

  const auto chains = mcmc::run(model.target(), cfg);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError(fmt::format("cannot create '{}': {}", o.out, ec.message()));
  {
    std::ostringstream s;
    mcmc::write_draws_csv(chains, s);
    write_text(dir / "draws.csv", s.str());
  }
  const std::vector<double> y(in.y.data(), in.y.data() + in.y.size());
  Json diag;
  diag["acceptance_rate"] = chains.acceptance_rate;
  diag["divergences"] = chains.divergences;
  Json summary;
  summary["seed"] = cfg.seed;
  summary["sampler"] = json_io::sampler_to_json(cfg);
  summary["parameters"] = summaries_json(mcmc::summarize(chains));
  summary["diagnostics"] = diag;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  Json natural;
  natural["seed"] = cfg.seed;
  natural["parameters"] = summaries_json(mcmc::summarize(derived_chains(chains, model)));
  write_text(dir / "destandardized.json", natural.dump(2) + "\n");
  write_text(dir / "model.json", model_text);
  {
    std::ostringstream s;
    write_csv(data, s);
    write_text(dir / "data.csv", s.str());
  }
  Json fit;
  fit["seed"] = cfg.seed;
  fit["sampler"] = json_io::sampler_to_json(cfg);
  fit["hmc_tuning"] = tuning;
  fit["n_obs"] = model.n_obs();
  fit["response"] = doc.response;
  fit["response_hash"] = response_hash(y);
  fit["group_labels"] = in.groups ? Json(in.groups->labels) : Json::array();
  fit["parameters"] = model.param_names();
  fit["derived"] = model.derived_names();
  write_text(dir / "fit.json", fit.dump(2) + "\n");
  out << fmt::format("fit: {} draws of {} parameters written to {} (seed {})\n", chains.total_draws(),
                     chains.dimension(), o.out, cfg.seed);
  return kExitOk;
}

struct LoadedFit {
  glm::ModelDocument doc;
  Inputs inputs;
  glm::CompiledModel model;
  mcmc::ChainSet chains;
  Json meta;
};

LoadedFit load_fit(const std::string& dir_path) {
  const fs::path dir(dir_path);
  for (const char* f : {"model.json", "data.csv", "fit.json", "draws.csv"}) {
    if (!fs::exists(dir / f)) throw InputError(fmt::format("'{}' is not a fit directory: {} missing", dir_path, f));
  }
  auto doc = glm::parse_model_document(read_text((dir / "model.json").string()));
  auto inputs = inputs_of(doc, read_csv((dir / "data.csv").string()));
  auto model = compile_inputs(inputs);
  const Json meta = json_io::parse(read_text((dir / "fit.json").string()), (dir / "fit.json").string());
  const std::vector<double> y(inputs.y.data(), inputs.y.data() + inputs.y.size());
  if (meta.value("response_hash", "") != response_hash(y)) {
    throw InputError(fmt::format("'{}': data.csv does not match the recorded response hash", dir_path));
  }
  std::istringstream draws(read_text((dir / "draws.csv").string()));
  auto chains = mcmc::read_draws_csv(draws);
  if (chains.names != model.param_names()) {
    throw InputError(fmt::format("'{}': draws.csv columns do not match the model parameters", dir_path));
  }
  return {std::move(doc), std::move(inputs), std::move(model), std::move(chains), meta};
}

struct PredictOptions {
  std::string fit, newdata, out;
  std::optional<std::uint64_t> seed;
  bool drop_na = false;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  const auto fit = load_fit(o.fit);
  const Dataset nd = read_csv(o.newdata, o.drop_na);
  if (nd.rows() == 0) throw InputError(fmt::format("'{}' has no rows", o.newdata));
  for (const auto& p : fit.doc.predictors) {
    if (!nd.has(p)) throw InputError(fmt::format("new data lacks predictor column '{}'", p));
  }
  glm::NewCases cases;
  cases.x = design_of(fit.doc, nd);
  if (fit.doc.group) {
    if (!nd.has(*fit.doc.group)) throw InputError(fmt::format("new data lacks group column '{}'", *fit.doc.group));
    const auto& known = fit.inputs.groups->labels;
    for (const auto& label : nd.labels(*fit.doc.group)) {
      const auto it = std::find(known.begin(), known.end(), label);
      cases.group.push_back(it == known.end() ? 0 : static_cast<int>(it - known.begin()) + 1);
    }
  }
  if (std::holds_alternative<glm::BinomialLik>(fit.doc.spec.likelihood)) {
    cases.trials = fit.doc.trials_column ? counts(nd, *fit.doc.trials_column)
                                         : std::vector<std::int64_t>(nd.rows(), fit.doc.trials_constant.value_or(1));
  }
  if (fit.doc.exposure_column) cases.exposure = nd.numeric(*fit.doc.exposure_column);
  fit.model.check_cases(cases);

  const std::uint64_t seed = o.seed ? *o.seed : entropy_seed();
  Rng rng(seed);
  const auto pred = predictive::posterior_predictive(fit.chains, fit.model, cases, rng);
  const auto observed = nd.has(fit.doc.response) ? nd.numeric(fit.doc.response) : std::vector<double>{};
  const auto report = predictive::predictive_check_report(pred, observed);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError(fmt::format("cannot create '{}': {}", o.out, ec.message()));
  std::ostringstream s;
  predictive::write_predictive_csv(pred, s);
  write_text(dir / "predictive.csv", s.str());
  Json rep = json_io::parse(predictive::report_to_json(report), "report");
  Json doc;
  doc["seed"] = seed;
  doc["fit"] = o.fit;
  for (auto it = rep.begin(); it != rep.end(); ++it) doc[it.key()] = it.value();
  write_text(dir / "report.json", doc.dump(2) + "\n");
  out << fmt::format("predict: {} draws for {} cases written to {} (seed {})\n", pred.simulations(), pred.cases(),
                     o.out, seed);
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_path, std::ostream& out) {
  if (dirs.size() < 2) throw InputError("compare needs at least two fit directories");
  std::vector<evidence::ModelScore> scores;
  std::string hash;
  for (const auto& d : dirs) {
    const auto fit = load_fit(d);
    const std::string h = fit.meta.value("response_hash", "");
    if (hash.empty()) hash = h;
    if (h != hash) throw InputError(fmt::format("'{}' was fitted to different response data", d));
    const auto& m = fit.model;
    const auto w = evidence::waic(
        evidence::pointwise_matrix(fit.chains, [&](const Eigen::VectorXd& th) { return m.pointwise_log_lik(th); }));
    const auto dc = evidence::dic(fit.chains, [&](const Eigen::VectorXd& th) { return m.log_likelihood(th); });
    scores.push_back({d, w.waic, w.p_waic, w.lppd, w.se, dc.dic, dc.p_dic});
  }
  const std::string text = evidence::comparison_to_json(evidence::compare_models(scores)) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  out << text;
  return kExitOk;
}

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
  std::vector<double> v;
  std::string cell;
  std::istringstream is(text);
  while (std::getline(is, cell, ',')) {
    std::istringstream lines(cell);
    std::string tok;
    while (lines >> tok) {
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw InputError(fmt::format("{}: '{}' is not a number", where, tok));
      }
      v.push_back(x);
    }
  }
  return v;
}

struct DecideOptions {
  std::string file, update, update_file, out;
  std::optional<std::size_t> axioms;
  std::optional<std::uint64_t> seed;
};

int cmd_decide(const DecideOptions& o, std::ostream& out) {
  auto m = decision::parse_decision_document(read_text(o.file));
  std::vector<double> ll;
  if (!o.update.empty()) ll = parse_numbers(o.update, "--update");
  if (!o.update_file.empty()) {
    const auto more = parse_numbers(read_text(o.update_file), o.update_file);
    ll.insert(ll.end(), more.begin(), more.end());
  }
  if (!o.update.empty() || !o.update_file.empty()) m = decision::with_updated_prior(m, ll);
  Json doc = json_io::parse(decision::ranking_to_json(decision::best_act(m)), "ranking");
  doc["prior"] = m.state_prior.probs();
  if (o.axioms) {
    const std::uint64_t seed = o.seed ? *o.seed : entropy_seed();
    Rng rng(seed);
    Json ax = json_io::parse(decision::axiom_report_to_json(decision::check_axioms(m, *o.axioms, rng)), "axioms");
    ax["seed"] = seed;
    doc["axioms"] = ax;
  }
  const std::string text = doc.dump(2) + "\n";
  if (!o.out.empty()) write_text(o.out, text);
  out << text;
  return kExitOk;
}

struct DistOptions {
  std::string family;
  std::vector<std::string> params;
  std::vector<double> density, cdf, quantile;
  std::size_t sample = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_dist(const DistOptions& o, std::ostream& out) {
  Json spec{{"family", o.family}};
  for (const auto& p : o.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw InputError(fmt::format("--param '{}': expected name=value", p));
    const std::string key = p.substr(0, eq), value = p.substr(eq + 1);
    const auto nums = parse_numbers(value, "--param " + key);
    if (nums.empty()) throw InputError(fmt::format("--param '{}': no value", p));
    spec[key] = nums.size() == 1 && value.find(',') == std::string::npos ? Json(nums[0]) : Json(nums);
  }
  const auto d = json_io::distribution_from_json(spec, "dist");
  if (d.is_multivariate()) throw InputError("dist: only univariate families are supported");
  for (double x : o.density) out << fmt::format("log_density({}) = {}\n", x, dist::log_density(d, x));
  for (double x : o.cdf) out << fmt::format("cdf({}) = {}\n", x, dist::cdf(d, x));
  for (double p : o.quantile) out << fmt::format("quantile({}) = {}\n", p, dist::quantile(d, p));
  if (o.sample > 0) {
    const std::uint64_t seed = o.seed ? *o.seed : entropy_seed();
    Rng rng(seed);
    out << fmt::format("seed = {}\n", seed);
    for (double v : dist::sample(d, rng, o.sample)) out << fmt::format("{}\n", v);
  }
  return kExitOk;
}

bool is_user_error(const std::exception& e) {
  return dynamic_cast<const InputError*>(&e) || dynamic_cast<const SpecError*>(&e) ||
         dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
         dynamic_cast<const DomainError*>(&e) || dynamic_cast<const ZeroVarianceError*>(&e) ||
         dynamic_cast<const EmptyDataError*>(&e) || dynamic_cast<const UnknownActError*>(&e) ||
         dynamic_cast<const MetaMismatchError*>(&e) || dynamic_cast<const SupportError*>(&e);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian inference from the command line: fit, predict, compare, decide, dist"};
  app.name("bayescore");
  app.require_subcommand(1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV data set");
  fit_cmd->add_option("--data", fit.data, "CSV data file with a header row")->required();
  fit_cmd->add_option("--model", fit.model, "JSON model specification")->required();
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->add_option("--chains", fit.chains, "Number of chains");
  fit_cmd->add_option("--iter", fit.iter, "Iterations per chain, warmup included");
  fit_cmd->add_option("--warmup", fit.warmup, "Warmup iterations per chain");
  fit_cmd->add_option("--thin", fit.thin, "Thinning interval");
  fit_cmd->add_option("--seed", fit.seed, "Random seed (drawn from entropy when absent)");
  fit_cmd->add_option("--algorithm", fit.algorithm, "auto, mh, gibbs or hmc");
  fit_cmd->add_option("--step-size", fit.step_size, "HMC leapfrog step size");
  fit_cmd->add_option("--leapfrog", fit.leapfrog, "HMC leapfrog steps per transition");
  fit_cmd->add_flag("--drop-na", fit.drop_na, "Delete rows with missing cells instead of failing");

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "Posterior predictive draws for new cases");
  pred_cmd->add_option("--fit", pred.fit, "Fit directory written by 'fit'")->required();
  pred_cmd->add_option("--newdata", pred.newdata, "CSV with the predictor columns")->required();
  pred_cmd->add_option("--out", pred.out, "Output directory")->required();
  pred_cmd->add_option("--seed", pred.seed, "Random seed (drawn from entropy when absent)");
  pred_cmd->add_flag("--drop-na", pred.drop_na, "Delete rows with missing cells instead of failing");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare fits by WAIC and DIC");
  cmp_cmd->add_option("fits", compare_dirs, "Fit directories")->required();
  cmp_cmd->add_option("--out", compare_out, "Also write the comparison JSON here");

  DecideOptions dec;
  auto* dec_cmd = app.add_subcommand("decide", "Rank the acts of a decision matrix by expected utility");
  dec_cmd->add_option("decision", dec.file, "JSON decision file")->required();
  dec_cmd->add_option("--update", dec.update, "Comma-separated log-likelihood per state");
  dec_cmd->add_option("--update-file", dec.update_file, "File of log-likelihoods per state");
  dec_cmd->add_option("--check-axioms", dec.axioms, "Check the preference axioms on this many random mixtures");
  dec_cmd->add_option("--seed", dec.seed, "Random seed for the axiom checks");
  dec_cmd->add_option("--out", dec.out, "Also write the ranking JSON here");

  DistOptions dst;
  auto* dist_cmd = app.add_subcommand("dist", "Density, CDF, quantile or draws of a distribution");
  dist_cmd->add_option("family", dst.family, "Family key, e.g. gauss, gamma, beta")->required();
  dist_cmd->add_option("--param", dst.params, "name=value, repeatable");
  dist_cmd->add_option("--density", dst.density, "Points for the log density");
  dist_cmd->add_option("--cdf", dst.cdf, "Points for the CDF");
  dist_cmd->add_option("--quantile", dst.quantile, "Probabilities for the quantile function");
  dist_cmd->add_option("--sample", dst.sample, "Number of draws");
  dist_cmd->add_option("--seed", dst.seed, "Random seed for draws");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (pred_cmd->parsed()) return cmd_predict(pred, out);
    if (cmp_cmd->parsed()) return cmd_compare(compare_dirs, compare_out, out);
    if (dec_cmd->parsed()) return cmd_decide(dec, out);
    if (dist_cmd->parsed()) return cmd_dist(dst, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return is_user_error(e) ? kExitUser : kExitRuntime;
  }
  return kExitUser;
}

}  // namespace bayescore::cli
