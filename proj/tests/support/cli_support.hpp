#pragma once

// Helpers for driving the command-line front end in-process.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "bayescore/cli.hpp"
#include "bayescore/rng.hpp"

namespace testcli {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

inline Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = bayescore::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Fresh scratch directory, removed on destruction.
class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : dir_(fs::temp_directory_path() / fmt::format("bayescore-{}-{}", tag, ::getpid())) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
    return path(name);
  }

 private:
  fs::path dir_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

/// y = b0 + sum b_j x_j + sigma e with standard-Gauss predictors, as CSV text.
inline std::string linear_csv(const std::vector<double>& beta, double sigma, int n, std::uint64_t seed,
                              int extra_noise_columns = 0) {
  bayescore::Rng rng(seed);
  std::string text = "y";
  const int k = static_cast<int>(beta.size()) - 1;
  for (int j = 1; j <= k + extra_noise_columns; ++j) text += fmt::format(",x{}", j);
  text += "\n";
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(static_cast<std::size_t>(k + extra_noise_columns));
    double y = beta[0];
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = rng.normal();
      if (static_cast<int>(j) < k) y += beta[j + 1] * x[j];
    }
    y += sigma * rng.normal();
    text += fmt::format("{}", y);
    for (double v : x) text += fmt::format(",{}", v);
    text += "\n";
  }
  return text;
}

inline std::string predictor_list(int k) {
  std::string s;
  for (int j = 1; j <= k; ++j) s += fmt::format("{}\"x{}\"", j > 1 ? "," : "", j);
  return s;
}

/// Gauss linear model on x1..xk.
inline std::string gauss_model(int k, const std::string& extra = "") {
  return fmt::format(R"({{"likelihood": "gauss", "response": "y", "predictors": [{}]{}}})", predictor_list(k), extra);
}

}  // namespace testcli
