#pragma once

// Estimating-function construction and the empirical-likelihood weight
// program: the working model m for E{delta * phi | y, z}, the stacked
// moment matrix G, the concave Lagrange maximization for lambda, and the
// implied probability weights.

#include <Eigen/Dense>

#include "elwqr/dataset.hpp"
#include "elwqr/missingness.hpp"
#include "elwqr/quantile.hpp"

namespace elwqr {

// Regression basis of the working model: quadratic in (y, z), i.e.
// (1, y, z', all pairwise products of (y, z) including squares).  The basis
// must extend strictly beyond the missingness-score basis (1, y, z'):
// anything inside that span makes the g1 block an exact linear combination
// of the score block, which forces lambda = 0 and removes the efficiency
// gain entirely.
int working_basis_dim(int dim_z);
Eigen::VectorXd working_basis(const Dataset& data, int i);

// Working model: component j of m(y,z) is alpha.row(j) * the retained
// columns of the quadratic basis.  Quadratic columns that are numerically
// dependent on the rest (a z column that is itself a square or product,
// say) are pruned at fit time; `columns` records the retained indices into
// the full basis.
struct WorkingModel {
  Eigen::MatrixXd alpha;    // p x columns.size()
  std::vector<int> columns; // ascending indices into the full basis

  Eigen::VectorXd project(const Eigen::VectorXd& full_basis) const {
    Eigen::VectorXd sub(static_cast<Eigen::Index>(columns.size()));
    for (size_t k = 0; k < columns.size(); ++k)
      sub[static_cast<Eigen::Index>(k)] = full_basis[columns[k]];
    return sub;
  }
  Eigen::VectorXd predict(const Eigen::VectorXd& full_basis) const {
    return alpha * project(full_basis);
  }
};

// Stacked nuisance/parameter estimate (alpha, beta, gamma).
struct Theta {
  WorkingModel alpha;
  Eigen::VectorXd beta;  // complete-case quantile coefficients
  Eigen::VectorXd gamma; // missingness parameter
};

enum class ELStatus { converged, infeasible, max_iter };

struct ELDiagnostics {
  Eigen::VectorXd lambda;
  Eigen::VectorXd weights;          // probability weights, length n
  double constraint_residual = 0.0; // |sum_i weights_i G_i|_inf
  double min_denominator = 0.0;     // min_i 1 + lambda'G_i
  int iterations = 0;
  ELStatus status = ELStatus::max_iter;
};

const char* to_string(ELStatus s);

/// Least-squares coefficients of each target column on the basis H.
/// Returns coefficient matrix with one row per target column.
/// Throws NumericalError on a rank-deficient basis.
Eigen::MatrixXd least_squares_rows(const Eigen::MatrixXd& H,
                                   const Eigen::MatrixXd& targets);

/// Fit the working model: regress delta_i * phi(.., beta_c, tau) (zero for
/// incomplete rows) on the quadratic (y, z) basis over all n rows,
/// componentwise least squares.
WorkingModel fit_working_model(const Dataset& data, const Eigen::VectorXd& beta_c,
                               QuantileLevel tau);

/// One row of the stacked moment function:
/// ((delta - pi) * m', (delta - pi) * yz') — the second block is the
/// logistic score contribution.
Eigen::VectorXd g_row(int delta, double pi, const Eigen::VectorXd& m,
                      const Eigen::VectorXd& yz_basis);

/// n x (p+q) moment matrix at theta.  Incomplete rows never touch x.
Eigen::MatrixXd build_g(const Dataset& data, const Theta& theta);

/// Maximize sum_i log(1 + lambda'G_i) over the domain 1 + lambda'G_i >= 1/n
/// by damped Newton from lambda = 0.  Reports infeasible when zero is not
/// interior to the convex hull of the rows (boundary stalls or unbounded
/// ascent).  Requires n > r.
ELDiagnostics solve_lambda(const Eigen::MatrixXd& G);

/// p_i = 1 / (n * (1 + lambda'G_i)); throws on a nonpositive denominator.
Eigen::VectorXd el_weights(const Eigen::MatrixXd& G, const Eigen::VectorXd& lambda);

} // namespace elwqr
