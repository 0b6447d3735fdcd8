#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "elwqr/quantile.hpp"

namespace elwqr {

// One sampled unit.  z is always observed; x is observed iff delta is set.
// Algorithms must consult delta and never read x of an incomplete row (the
// loader and the simulation generator leave it empty).
struct Observation {
  double y = 0.0;
  Eigen::VectorXd z;
  Eigen::VectorXd x;
  bool delta = false;
};

struct Dataset {
  std::vector<Observation> rows;
  int dim_x = 0;
  int dim_z = 0;
  std::string y_name = "y";
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;

  int n() const { return static_cast<int>(rows.size()); }
  int n_complete() const;
  int p() const { return 1 + dim_x + dim_z; } // length of W = (1, X', Z')'

  // Throws std::invalid_argument on dimension or finiteness violations.
  void validate() const;

  // W-row of a complete case (requires rows[i].delta).
  DesignRow design_row(int i) const;

  // (1, y, z')' — the regression basis shared by the missingness model and
  // the working model.
  Eigen::VectorXd yz_basis(int i) const;

  // Default names if not set: y, x1..., z1...
  void ensure_names();
  // Coefficient labels in W order: intercept, x..., z...
  std::vector<std::string> component_names() const;
};

} // namespace elwqr
