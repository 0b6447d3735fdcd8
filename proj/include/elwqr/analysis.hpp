#pragma once

// The multi-quantile analysis workflow: point estimates plus bootstrap
// standard errors over a tau grid, written as plot-ready long-format CSVs.

#include <cstdint>
#include <string>
#include <vector>

#include "elwqr/dataset.hpp"
#include "elwqr/estimators.hpp"

namespace elwqr {

struct RunConfig {
  std::vector<double> tau_grid;
  std::vector<EstimatorKind> estimators;
  int bootstrap_b = 200;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  int threads = 0;
  std::uint64_t config_hash = 0; // provenance stamp for output headers

  void validate() const; // throws std::invalid_argument
};

struct AnalysisFailure {
  double tau = 0.0;
  EstimatorKind estimator = EstimatorKind::cca;
  std::string message;
};

struct AnalysisReport {
  std::string coefficients_path;
  std::string se_path;
  std::string report_path;
  std::vector<AnalysisFailure> failures;
};

/// Fit every requested estimator at every tau, bootstrap its standard
/// errors, and emit coefficients.csv and se.csv (tau, estimator, component,
/// value) plus run_report.json.  Failures are recorded and skipped; the run
/// continues.  Deterministic given the seed.
AnalysisReport run_analysis(const Dataset& data, const RunConfig& config);

} // namespace elwqr
