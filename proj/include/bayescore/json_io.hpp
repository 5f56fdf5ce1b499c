#pragma once

#include <string>

#include <json.hpp>

#include "bayescore/dist.hpp"
#include "bayescore/glm.hpp"
#include "bayescore/sampler.hpp"

namespace bayescore::json_io {

/// Insertion-ordered so emitted documents are stable.
using Json = nlohmann::ordered_json;

/// {"family": "gauss", "mu": 0, "sigma": 1}. Throws SpecError naming `where`
/// and the offending field on unknown families, unknown or missing fields.
dist::Distribution distribution_from_json(const Json& j, const std::string& where);
Json distribution_to_json(const dist::Distribution& d);
std::string family_key(const dist::Distribution& d);

/// A distribution object with an optional "on": "value" | "sd" | "variance" | "precision".
glm::PositivePrior positive_prior_from_json(const Json& j, const std::string& where);
Json positive_prior_to_json(const glm::PositivePrior& p);

/// A distribution, {"family": "truncated_gauss", ...} or {"family": "adaptive", ...}.
glm::PriorSpec prior_from_json(const Json& j, const std::string& where);
Json prior_to_json(const glm::PriorSpec& p);

/// Reads the sampler block into `config`, returning the names of the fields present.
std::vector<std::string> sampler_from_json(const Json& j, mcmc::SamplerConfig& config);
Json sampler_to_json(const mcmc::SamplerConfig& config);

/// Parses text, converting parse failures into SpecError.
Json parse(const std::string& text, const std::string& where);

}  // namespace bayescore::json_io
