#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bayescore/errors.hpp"
#include "bayescore/sampler.hpp"

namespace bayescore::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 2;
inline constexpr int kExitRuntime = 3;

/// Bad files, columns or arguments; maps to kExitUser.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Rectangular table of raw cells, column-major.
struct Dataset {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
  bool has(const std::string& name) const;
  /// Throws InputError naming the column.
  std::size_t index_of(const std::string& name) const;
  /// Throws InputError naming the column and row of a non-numeric cell.
  std::vector<double> numeric(const std::string& name) const;
  const std::vector<std::string>& labels(const std::string& name) const;
};

/// Comma-separated with a mandatory header row; RFC 4180 quoting. Empty or
/// "NA" cells are missing: the row is rejected with InputError unless
/// drop_na, which deletes it.
Dataset parse_csv(std::istream& is, const std::string& where, bool drop_na = false);
Dataset read_csv(const std::string& path, bool drop_na = false);
void write_csv(const Dataset& data, std::ostream& os);

/// FNV-1a 64 over the shortest round-trip text of each value, as 16 hex digits.
std::string response_hash(const std::vector<double>& y);

/// Step size and leapfrog count from the curvature at the posterior mode:
/// step 0.4 min sd, trajectory about 1.5 max sd, 10 to 300 steps.
mcmc::HMC tune_hmc(const mcmc::LogTarget& target, Rng& rng);

/// Runs one command line (without the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bayescore::cli
