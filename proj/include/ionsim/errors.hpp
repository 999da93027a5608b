#pragma once

#include <stdexcept>
#include <string>

namespace ionsim {

// Configuration / input problems: the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures (non-convergence, invariant violations, unphysical
// constructions): the CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace ionsim
