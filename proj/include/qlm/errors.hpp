#pragma once

#include <stdexcept>
#include <string>

namespace qlm {

/// Thrown when caller-supplied data is malformed (wrong sizes, bad ranges,
/// mismatched curvature scales).  CLI maps this to exit code 1.
struct InvalidInput : std::invalid_argument {
  explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Thrown when a computation leaves its domain of validity (divergent flow,
/// caustic crossing, nonpositive mean curvature).  CLI maps this to exit code 2.
struct NumericalFailure : std::runtime_error {
  explicit NumericalFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qlm
