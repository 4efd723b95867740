#pragma once

#include <stdexcept>
#include <string>

namespace metasel {

// Base of every error the library raises. Callers that only care about
// "something in metasel failed" catch this; the CLI maps subclasses onto
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define METASEL_DEFINE_ERROR(Name)              \
  class Name : public ::metasel::Error {        \
   public:                                      \
    using ::metasel::Error::Error;              \
  }

METASEL_DEFINE_ERROR(UnknownPredicate);
METASEL_DEFINE_ERROR(ArityMismatch);
METASEL_DEFINE_ERROR(IllegalMonadicFill);
METASEL_DEFINE_ERROR(ParseError);
METASEL_DEFINE_ERROR(ExhaustedSpace);
METASEL_DEFINE_ERROR(CapExceeded);
METASEL_DEFINE_ERROR(VocabularyOverflow);
METASEL_DEFINE_ERROR(ShapeMismatch);
METASEL_DEFINE_ERROR(NonFiniteLoss);
METASEL_DEFINE_ERROR(UnknownStrategy);
METASEL_DEFINE_ERROR(ManifestViolation);
METASEL_DEFINE_ERROR(IoFailure);
METASEL_DEFINE_ERROR(ConfigError);

}  // namespace metasel

namespace metasel {
METASEL_DEFINE_ERROR(InvalidMetasubstitution);
}  // namespace metasel
