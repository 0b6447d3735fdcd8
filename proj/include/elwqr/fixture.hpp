#pragma once

// Synthetic blood-pressure fixture with the same shape as the NHANES
// extract used in the analysis workflow: columns sbp, bmi, alcohol, age,
// with alcohol missing not-at-random at an exact target rate.  The real
// extract is not bundled; this generator stands in for it.

#include <cstdint>
#include <string>

namespace elwqr {

struct FixtureOptions {
  int n = 7104;
  double missing_rate = 0.5329; // realized exactly up to rounding to a count
  std::uint64_t seed = 1;
};

void write_bp_fixture(const std::string& path, const FixtureOptions& opts);

} // namespace elwqr
