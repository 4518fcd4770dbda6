#pragma once

#include <stdexcept>
#include <string>

namespace treelearn {

/// Base class for every error raised by the library. The CLI maps these to
/// exit status 2 (usage) unless a verification failure is being reported.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TREELEARN_DEFINE_ERROR(Name)          \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  };

TREELEARN_DEFINE_ERROR(DimensionMismatch)
TREELEARN_DEFINE_ERROR(TooLargeForExact)
TREELEARN_DEFINE_ERROR(EmptyIndexSet)
TREELEARN_DEFINE_ERROR(UnsupportedGate)
TREELEARN_DEFINE_ERROR(IndexOutOfRange)
TREELEARN_DEFINE_ERROR(PreconditionViolated)
TREELEARN_DEFINE_ERROR(ScaleTooLarge)
TREELEARN_DEFINE_ERROR(EmptyBatch)
TREELEARN_DEFINE_ERROR(InvalidRange)
TREELEARN_DEFINE_ERROR(LcaViolated)
TREELEARN_DEFINE_ERROR(ShapeMismatch)
TREELEARN_DEFINE_ERROR(TooLarge)
TREELEARN_DEFINE_ERROR(NonFiniteLoss)
TREELEARN_DEFINE_ERROR(ParseError)

#undef TREELEARN_DEFINE_ERROR

}  // namespace treelearn
