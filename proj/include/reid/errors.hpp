#pragma once

#include <stdexcept>
#include <string>

namespace reid {

// Error categories map 1:1 onto CLI exit codes:
//   UsageError -> 1, DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// Dimension mismatches at operation boundaries.
struct ShapeError : DataError {
  using DataError::DataError;
};

}  // namespace reid
