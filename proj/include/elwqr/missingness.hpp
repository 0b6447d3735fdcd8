#pragma once

// Parametric observation-probability model pi(y, z, gamma), its binomial
// maximum-likelihood fit, and the associated score vector.  The model is
// logistic in the basis (1, y, z'); the basis and link live behind
// pi_logistic / score_ub so an alternative link can be slotted in.

#include <Eigen/Dense>
#include <vector>

#include "elwqr/dataset.hpp"

namespace elwqr {

enum class MleStatus { converged, separated, max_iter };

struct MleFit {
  Eigen::VectorXd gamma;
  double loglik = 0.0;
  double score_norm = 0.0; // sup-norm of the score at gamma
  int iterations = 0;
  MleStatus status = MleStatus::max_iter;
  // Smallest fitted probability across the data; reported as a diagnostic
  // since no lower bound is enforced.
  double min_pi = 0.0;
};

const char* to_string(MleStatus s);

/// P(delta=1 | y, z) = 1 / (1 + exp(-g0 - y*g1 - z'g2)), overflow-safe and
/// clamped strictly inside (0,1).
double pi_logistic(double y, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& gamma);

/// Binomial log-likelihood of gamma on the dataset; always <= 0.
double binomial_loglik(const Dataset& data, const Eigen::VectorXd& gamma);

/// Score contribution of one observation.  For the logistic link the
/// general quotient collapses to (delta - pi) * (1, y, z')'.
Eigen::VectorXd score_ub(int delta, double y, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& gamma);

/// Newton-Raphson logistic MLE on an explicit design matrix H (n x q) with
/// 0/1 responses.  Step-halving keeps the log-likelihood non-decreasing;
/// the fit aborts with status separated once |gamma|_inf exceeds 30 or the
/// Hessian is numerically singular.  Requires both response classes.
MleFit fit_logistic_mle(const Eigen::MatrixXd& H, const std::vector<int>& response);

/// MLE of the missingness parameter on basis (1, y, z').
MleFit fit_gamma_mle(const Dataset& data);

/// n x (2 + dim_z) matrix with rows (1, y_i, z_i').
Eigen::MatrixXd missingness_basis(const Dataset& data);

/// Fitted pi for every row of the dataset.
Eigen::VectorXd fitted_pi(const Dataset& data, const Eigen::VectorXd& gamma);

} // namespace elwqr
