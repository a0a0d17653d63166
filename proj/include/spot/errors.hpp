#pragma once

#include <stdexcept>

namespace spot {

// File or format problem (missing dataset, bad header, truncation).
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value where the contract requires finite input/output.
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spot
