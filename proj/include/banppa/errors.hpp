#pragma once

#include <stdexcept>
#include <string>

namespace banppa {

// Problems with input data: malformed files, events outside the declared
// window, artifacts that do not belong together.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure that survived the configured mitigations, e.g. a kernel
// matrix that stays indefinite after the jitter ladder is exhausted.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace banppa
