#pragma once

// CSV ingestion with explicit missing-data semantics: an empty field or the
// literal token NA in a missing-covariate column marks the row incomplete;
// anything else that fails to parse is an error, never a silent NaN.

#include <string>
#include <vector>

#include "elwqr/dataset.hpp"

namespace elwqr {

struct TransformOp {
  enum class Kind { log1p, affine, square };
  Kind kind = Kind::log1p;
  double shift = 0.0; // affine: (value + shift) * scale
  double scale = 1.0;
};

// Pipeline producing column `column` from raw column `from` (defaults to
// `column` itself).  All pipelines read raw parsed values; a target absent
// from the header is appended as a derived column.
struct ColumnTransform {
  std::string column;
  std::string from;
  std::vector<TransformOp> ops;
};

struct ColumnSpec {
  std::string response;
  std::vector<std::string> always_observed;   // z columns
  std::vector<std::string> missing_covariates; // x columns
  std::vector<ColumnTransform> transforms;
};

struct LoadReport {
  Dataset data;
  int rejected_rows = 0;   // rows with missing response or z, counted warnings
  double missing_rate = 0.0;
};

LoadReport load_csv(const std::string& path, const ColumnSpec& spec);

/// Write y, x..., z... with masked x fields as NA.  Loading the file back
/// with the matching spec reproduces the dataset exactly.
void save_csv(const Dataset& data, const std::string& path);

/// Default naming convention for bare data files: response column y,
/// z-prefixed columns always observed, x-prefixed columns missing.
ColumnSpec default_spec_for_header(const std::vector<std::string>& header);
std::vector<std::string> read_csv_header(const std::string& path);

} // namespace elwqr
