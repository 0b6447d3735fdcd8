#pragma once

#include <stdexcept>
#include <string>

namespace elwqr {

// Validation problems (bad dimensions, non-finite input, malformed files)
// are reported as std::invalid_argument.  NumericalError marks failures of
// the numerics themselves: separation, EL infeasibility, singular blocks,
// rank-deficient designs.  Messages carry a "stage/" prefix so multi-stage
// pipelines can be diagnosed from the what() string alone.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace elwqr
