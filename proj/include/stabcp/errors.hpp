#pragma once

#include <stdexcept>
#include <string>

namespace stabcp {

// Raised when input data is unusable: malformed CSV, missing values,
// zero-variance columns, shape mismatches discovered at load time.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a numeric routine cannot deliver a trustworthy result:
// solver non-convergence, overflow in a bound, a kernel matrix that is
// numerically singular.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stabcp
