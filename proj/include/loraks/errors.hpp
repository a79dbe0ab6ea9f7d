#pragma once

#include <stdexcept>
#include <string>

namespace loraks {

// Error taxonomy used across the library.  The CLI maps these onto exit
// codes: ParamError -> 2 (usage), IoError -> 3, NumericError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched or impossible array dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Out-of-range or inconsistent parameter values.
struct ParamError : Error {
  using Error::Error;
};

// File-format and filesystem problems.
struct IoError : Error {
  using Error::Error;
};

// Non-finite data, failed factorizations, divergence.
struct NumericError : Error {
  using Error::Error;
};

} // namespace loraks
