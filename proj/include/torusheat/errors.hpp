#pragma once

#include <stdexcept>
#include <string>

namespace torusheat {

// Domain error types. Each corresponds to a contract violation or a
// signalled condition a caller may want to catch individually.

struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TruncationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuadratureFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DuplicatePoints : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BoundViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ViolationFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyBoundary : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LatticeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct WindowTooNarrow : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownExperiment : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace torusheat
