#include "elwqr/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "elwqr/rng.hpp"

namespace elwqr {

void write_bp_fixture(const std::string& path, const FixtureOptions& opts) {
  if (opts.n < 10) throw std::invalid_argument("fixture: n too small");
  if (!(opts.missing_rate > 0.0 && opts.missing_rate < 1.0))
    throw std::invalid_argument("fixture: missing rate must lie in (0,1)");

  Rng rng(opts.seed);
  const int n = opts.n;
  std::vector<double> age(static_cast<size_t>(n)), bmi(static_cast<size_t>(n)),
      alcohol(static_cast<size_t>(n)), sbp(static_cast<size_t>(n)),
      propensity(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    const size_t k = static_cast<size_t>(i);
    age[k] = 18.0 + 62.0 * rng.uniform01();
    bmi[k] = 27.5 + 5.5 * rng.normal();
    if (bmi[k] < 15.0) bmi[k] = 15.0 + (15.0 - bmi[k]) * 0.1;
    // Daily alcohol: mostly zero or small, long right tail.
    const double latent = rng.normal();
    alcohol[k] = latent < 0.2 ? 0.0 : std::expm1(0.8 * latent);
    const double a = (age[k] - 50.0) / 10.0;
    sbp[k] = 118.0 + 1.1 * std::log1p(alcohol[k]) + 0.35 * (bmi[k] - 27.5) +
             4.4 * a + 1.1 * a * a + 11.0 * rng.normal();
    // Non-reporting depends on consumption itself.
    propensity[k] = 1.0 / (1.0 + std::exp(-(0.35 - 0.55 * std::log1p(alcohol[k]) +
                                            0.4 * rng.normal())));
  }

  // Mask exactly round(rate * n) rows, the ones with highest propensity.
  const int target = static_cast<int>(std::lround(opts.missing_rate * n));
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return propensity[static_cast<size_t>(a)] > propensity[static_cast<size_t>(b)];
  });
  std::vector<char> missing(static_cast<size_t>(n), 0);
  for (int i = 0; i < target; ++i) missing[static_cast<size_t>(order[static_cast<size_t>(i)])] = 1;

  std::ofstream out(path);
  if (!out) throw std::invalid_argument("fixture: cannot write " + path);
  out << "sbp,bmi,alcohol,age\n";
  char buf[160];
  for (int i = 0; i < n; ++i) {
    const size_t k = static_cast<size_t>(i);
    if (missing[k]) {
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g,NA,%.6g\n", sbp[k], bmi[k], age[k]);
    } else {
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g\n", sbp[k], bmi[k],
                    alcohol[k], age[k]);
    }
    out << buf;
  }
}

} // namespace elwqr
