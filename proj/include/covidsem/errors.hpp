#pragma once

#include <stdexcept>
#include <string>

namespace covidsem {

// Malformed or inconsistent input data. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Estimation or simulation failure (rank deficiency, divergence, ...).
// CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace covidsem
