#pragma once

#include <stdexcept>
#include <string>

namespace unlearn {

// File/stream level failures (missing file, bad magic, truncated container).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (losses, gradients).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace unlearn
