#pragma once

// Scalar normal-distribution helpers shared across the library.

namespace elwqr {

double norm_pdf(double x);
double norm_cdf(double x);

// Standard normal quantile (Wichura's AS 241, double precision).
// Throws std::invalid_argument outside (0,1).
double norm_quantile(double p);

} // namespace elwqr
