#pragma once

#include <stdexcept>
#include <string>

namespace bayescore {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BAYESCORE_DEFINE_ERROR(Name)      \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// Argument outside the support or domain of a function.
BAYESCORE_DEFINE_ERROR(DomainError);
// Distribution or configuration parameter violating its invariant.
BAYESCORE_DEFINE_ERROR(ParameterError);
// Result undefined because all mass vanished or a variance is exactly zero.
BAYESCORE_DEFINE_ERROR(DegenerateError);
BAYESCORE_DEFINE_ERROR(ConsistencyError);
BAYESCORE_DEFINE_ERROR(EmptyDataError);
BAYESCORE_DEFINE_ERROR(ImproperPosteriorError);
BAYESCORE_DEFINE_ERROR(ImproperPriorError);
BAYESCORE_DEFINE_ERROR(InitError);
BAYESCORE_DEFINE_ERROR(MissingConditionalError);
BAYESCORE_DEFINE_ERROR(SpecError);
BAYESCORE_DEFINE_ERROR(ZeroVarianceError);
BAYESCORE_DEFINE_ERROR(MetaMismatchError);
BAYESCORE_DEFINE_ERROR(DimensionError);
BAYESCORE_DEFINE_ERROR(InfeasibleError);
BAYESCORE_DEFINE_ERROR(ToleranceError);
BAYESCORE_DEFINE_ERROR(SupportError);
BAYESCORE_DEFINE_ERROR(UnknownActError);

#undef BAYESCORE_DEFINE_ERROR

}  // namespace bayescore
