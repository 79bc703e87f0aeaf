#pragma once

#include <stdexcept>
#include <string>

namespace diffest {

// Error taxonomy shared across the library. Solver-level failures
// (no root, degenerate normalizer inside a study) are statuses, not
// exceptions; everything here signals a broken precondition or a
// numeric breakdown at the call site.

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteResult : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OrderTooHigh : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyPath : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingDerivative : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndivisibleGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownEstFun : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllCensored : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateNormalizer : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroDenominator : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a simulated state leaves the model's state space; carries
// the offending step index.
struct StateEscape : std::runtime_error {
  long step_index;
  StateEscape(const std::string& what, long step)
      : std::runtime_error(what), step_index(step) {}
};

}  // namespace diffest
