#pragma once

#include <stdexcept>
#include <string>

namespace nsr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NSR_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

NSR_DEFINE_ERROR(MalformedExpression);
NSR_DEFINE_ERROR(ArityMismatch);
NSR_DEFINE_ERROR(InvalidConfig);
NSR_DEFINE_ERROR(EmptySupport);
NSR_DEFINE_ERROR(NonFiniteLoss);
NSR_DEFINE_ERROR(CorruptCheckpoint);
NSR_DEFINE_ERROR(VersionMismatch);
NSR_DEFINE_ERROR(NoValidCandidate);
NSR_DEFINE_ERROR(TooManyVariables);
NSR_DEFINE_ERROR(FitFailed);
NSR_DEFINE_ERROR(DataFileMissing);
NSR_DEFINE_ERROR(InsufficientDisjointSkeletons);
NSR_DEFINE_ERROR(ParseError);
NSR_DEFINE_ERROR(NonFiniteObjective);

#undef NSR_DEFINE_ERROR

}  // namespace nsr
