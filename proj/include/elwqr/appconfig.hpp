#pragma once

// JSON configuration schemas for the CLI (versioned with schema_version).

#include <cstdint>
#include <string>
#include <vector>

#include "elwqr/analysis.hpp"
#include "elwqr/csv.hpp"
#include "elwqr/simgen.hpp"

namespace elwqr {

struct SimulateConfig {
  SimDesign design = SimDesign::benchmark_default();
  std::vector<int> n_values;
  std::vector<double> tau_values;
  int reps = 1000;
  std::vector<EstimatorKind> estimators;
  std::uint64_t config_hash = 0;
};

struct AnalyzeConfig {
  ColumnSpec columns;
  RunConfig run;
};

// FNV-1a of the canonical config text; stamped into output headers.
std::uint64_t hash_config_text(const std::string& text);

SimulateConfig parse_simulate_config(const std::string& path);
AnalyzeConfig parse_analyze_config(const std::string& path);
ColumnSpec parse_column_spec_file(const std::string& path);

} // namespace elwqr
