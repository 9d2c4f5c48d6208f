#pragma once

#include <stdexcept>
#include <string>

namespace coal {

// Root of every error the library throws. Subclasses exist so callers (and
// tests) can distinguish the failure category without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COAL_DEFINE_ERROR(Name)      \
  class Name : public Error {        \
   public:                           \
    using Error::Error;              \
  };

COAL_DEFINE_ERROR(DimensionError)
COAL_DEFINE_ERROR(IndexError)
COAL_DEFINE_ERROR(NormalizationError)
COAL_DEFINE_ERROR(DivergenceError)
COAL_DEFINE_ERROR(UsageError)
COAL_DEFINE_ERROR(ProtocolError)
COAL_DEFINE_ERROR(FormatError)
COAL_DEFINE_ERROR(ConsistencyError)
COAL_DEFINE_ERROR(LengthError)
COAL_DEFINE_ERROR(SamplerError)
COAL_DEFINE_ERROR(EstimationError)
COAL_DEFINE_ERROR(MetricError)
COAL_DEFINE_ERROR(TableError)
COAL_DEFINE_ERROR(ConfigError)
COAL_DEFINE_ERROR(IoError)

#undef COAL_DEFINE_ERROR

}  // namespace coal
