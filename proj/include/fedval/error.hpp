#pragma once

#include <stdexcept>
#include <string>

namespace fedval {

// Base of every error thrown by the library. `kind()` is a short stable tag
// used by the CLI to pick an exit code and by tests to check error paths.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define FEDVAL_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(tag, what) {}         \
  };

FEDVAL_DEFINE_ERROR(SchemaError, "schema")
FEDVAL_DEFINE_ERROR(ParseError, "parse")
FEDVAL_DEFINE_ERROR(EmptyInputError, "empty-input")
FEDVAL_DEFINE_ERROR(InvalidArgumentError, "invalid-argument")
FEDVAL_DEFINE_ERROR(ShapeError, "shape")
FEDVAL_DEFINE_ERROR(InfeasibleSkewError, "infeasible-skew")
FEDVAL_DEFINE_ERROR(InvalidPartitionError, "invalid-partition")
FEDVAL_DEFINE_ERROR(InvalidValidationSplitError, "invalid-validation-split")
FEDVAL_DEFINE_ERROR(MissingGroupError, "missing-group")
FEDVAL_DEFINE_ERROR(MissingPositivesError, "missing-positives")
FEDVAL_DEFINE_ERROR(DegenerateWeightsError, "degenerate-weights")
FEDVAL_DEFINE_ERROR(NumericOverflowError, "numeric-overflow")
FEDVAL_DEFINE_ERROR(ConfigError, "config")
FEDVAL_DEFINE_ERROR(UnknownPresetError, "unknown-preset")
FEDVAL_DEFINE_ERROR(RoundError, "round")

#undef FEDVAL_DEFINE_ERROR

}  // namespace fedval
