#include "bayescore/predictive.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "bayescore/json_io.hpp"

namespace bayescore::predictive {

PredictiveSample prior_predictive(const PriorInput& prior, const LikelihoodFactory& likelihood, Rng& rng,
                                  std::size_t n_sim) {
  if (std::holds_alternative<ImproperUniform>(prior)) {
    throw ImproperPriorError("prior predictive needs a proper prior");
  }
  if (n_sim == 0) throw ParameterError("prior predictive needs at least one simulation");
  const auto& d = std::get<dist::Distribution>(prior);
  PredictiveSample out;
  out.draws.resize(static_cast<Eigen::Index>(n_sim), 1);
  out.case_names = {"y"};
  Vector theta(static_cast<Eigen::Index>(d.dimension()));
  for (std::size_t s = 0; s < n_sim; ++s) {
    if (d.is_multivariate()) {
      theta = dist::sample_mv(d, rng, 1).row(0).transpose();
    } else {
      theta(0) = dist::draw(d, rng);
    }
    out.draws(static_cast<Eigen::Index>(s), 0) = dist::draw(likelihood(theta), rng);
  }
  return out;
}

PredictiveSample posterior_predictive(const mcmc::ChainSet& chains, const glm::CompiledModel& model,
                                      const glm::NewCases& cases, Rng& rng) {
  if (chains.names != model.param_names()) {
    throw DimensionError("posterior draws do not carry the model's parameters");
  }
  model.check_cases(cases);
  std::size_t n_draws = 0;
  for (const auto& c : chains.chains) n_draws += static_cast<std::size_t>(c.rows());
  if (n_draws == 0) throw DimensionError("no posterior draws");
  PredictiveSample out;
  out.draws.resize(static_cast<Eigen::Index>(n_draws), static_cast<Eigen::Index>(cases.rows()));
  for (std::size_t j = 0; j < cases.rows(); ++j) {
    out.case_names.push_back(fmt::format("case{}", j + 1));
    Rng stream = rng.split(j);
    Eigen::Index row = 0;
    for (const auto& c : chains.chains) {
      for (Eigen::Index r = 0; r < c.rows(); ++r) {
        out.draws(row++, static_cast<Eigen::Index>(j)) = model.draw_response(c.row(r).transpose(), cases, j, stream);
      }
    }
  }
  return out;
}

Histogram freedman_diaconis(const std::vector<double>& values, std::size_t max_bins) {
  if (values.empty()) throw EmptyDataError("histogram of no values");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const double lo = v.front(), hi = v.back();
  Histogram h;
  if (!(hi > lo)) {
    h.edges = {lo, hi};
    h.counts = {v.size()};
    return h;
  }
  const double n = static_cast<double>(v.size());
  const double iqr = mcmc::sample_quantile(v, 0.75) - mcmc::sample_quantile(v, 0.25);
  std::size_t bins;
  if (iqr > 0.0) {
    bins = static_cast<std::size_t>(std::ceil((hi - lo) / (2.0 * iqr * std::cbrt(1.0 / n))));
  } else {
    bins = static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;
  }
  bins = std::clamp<std::size_t>(bins, 1, max_bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double x : v) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

PredictiveReport predictive_check_report(const PredictiveSample& pred, const std::vector<double>& y_observed) {
  if (!y_observed.empty() && y_observed.size() != pred.cases()) {
    throw DimensionError(fmt::format("{} observed values for {} predictive cases", y_observed.size(), pred.cases()));
  }
  PredictiveReport rep;
  if (!y_observed.empty()) {
    double s = 0.0;
    for (double y : y_observed) s += y;
    rep.observed_mean = s / static_cast<double>(y_observed.size());
  }
  for (std::size_t j = 0; j < pred.cases(); ++j) {
    const auto col = pred.draws.col(static_cast<Eigen::Index>(j));
    std::vector<double> v(col.data(), col.data() + col.size());
    CaseReport c;
    c.name = j < pred.case_names.size() ? pred.case_names[j] : fmt::format("case{}", j + 1);
    const double n = static_cast<double>(v.size());
    c.mean = col.mean();
    c.sd = v.size() > 1 ? std::sqrt((col.array() - c.mean).square().sum() / (n - 1.0)) : 0.0;
    c.q025 = mcmc::sample_quantile(v, 0.025);
    c.q975 = mcmc::sample_quantile(v, 0.975);
    c.histogram = freedman_diaconis(v);
    if (!y_observed.empty()) {
      c.observed = y_observed[j];
      c.pit = static_cast<double>((col.array() < y_observed[j]).count()) / n;
    }
    rep.cases.push_back(std::move(c));
  }
  return rep;
}

double ks_uniform_distance(std::vector<double> values) {
  if (values.empty()) throw EmptyDataError("no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

void write_predictive_csv(const PredictiveSample& pred, std::ostream& os) {
  os << "draw";
  for (const auto& n : pred.case_names) os << ',' << n;
  os << '\n';
  for (Eigen::Index r = 0; r < pred.draws.rows(); ++r) {
    os << r + 1;
    for (Eigen::Index c = 0; c < pred.draws.cols(); ++c) os << ',' << fmt::format("{}", pred.draws(r, c));
    os << '\n';
  }
}

std::string report_to_json(const PredictiveReport& report) {
  json_io::Json j;
  j["observed_mean"] = report.observed_mean ? json_io::Json(*report.observed_mean) : json_io::Json(nullptr);
  j["binning"] = "freedman_diaconis";
  json_io::Json cases = json_io::Json::array();
  for (const auto& c : report.cases) {
    json_io::Json cj;
    cj["name"] = c.name;
    cj["mean"] = c.mean;
    cj["sd"] = c.sd;
    cj["q025"] = c.q025;
    cj["q975"] = c.q975;
    cj["observed"] = c.observed ? json_io::Json(*c.observed) : json_io::Json(nullptr);
    cj["pit"] = c.pit ? json_io::Json(*c.pit) : json_io::Json(nullptr);
    cj["histogram"] = {{"edges", c.histogram.edges}, {"counts", c.histogram.counts}};
    cases.push_back(std::move(cj));
  }
  j["cases"] = std::move(cases);
  return j.dump(2) + "\n";
}

}  // namespace bayescore::predictive
