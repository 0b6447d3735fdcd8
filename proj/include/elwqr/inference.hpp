#pragma once

// Inference for the fitted coefficients: pairs-bootstrap standard errors
// (the practical route) and plug-in estimates of the sandwich covariance
// blocks, including the profile-likelihood block identity used as a
// cross-check of the assembled matrices.

#include <Eigen/Dense>
#include <cstdint>

#include "elwqr/dataset.hpp"
#include "elwqr/elweights.hpp"
#include "elwqr/estimators.hpp"

namespace elwqr {

struct CovComponents {
  Eigen::MatrixXd f_beta; // density-weighted design moment, p x p
  Eigen::MatrixXd s_phi;  // complete-case score outer moment, p x p
  Eigen::MatrixXd d1;     // g1 outer moment, p x p
  Eigen::MatrixXd d2;     // g1 x score cross moment, p x q
  Eigen::MatrixXd d3;     // phi x g1 cross moment, p x p
  Eigen::MatrixXd d4;     // phi x score cross moment, p x q
  Eigen::MatrixXd s_b;    // score outer moment, q x q
  Eigen::MatrixXd v1;     // d3 - d4 s_b^{-1} d2'
  Eigen::MatrixXd v2;     // d1 - d2 s_b^{-1} d2'
  Eigen::MatrixXd sigma_cca; // f^{-1} s_phi f^{-1}
  Eigen::MatrixXd sigma_elw; // sigma_cca - f^{-1} v1 v2^{-1} v1' f^{-1}
  double bandwidth = 0.0;    // kernel bandwidth actually used
};

struct BootstrapResult {
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd replicates; // B x p; failed replicates are NaN rows
  int b = 0;
  std::uint64_t seed = 0;
  int failures = 0;
};

/// Hall-Sheather rate bandwidth for the quantile density (before scaling
/// by the residual spread).
double hall_sheather_bandwidth(int n, double tau);

/// Row-resampling bootstrap of the chosen estimator.  Replicates that fail
/// numerically (separation, infeasibility, degeneracy) are dropped and
/// counted; more than 20% failures raises NumericalError.  Deterministic
/// given the seed, independent of the thread count.
BootstrapResult bootstrap_se(const Dataset& data, QuantileLevel tau,
                             EstimatorKind kind, int b, std::uint64_t seed,
                             int threads = 0);

/// Sample-moment plug-ins of every covariance block at theta.  All averages
/// divide by n.  The density at zero is a Gaussian kernel on complete-case
/// residuals; bandwidth <= 0 selects Hall-Sheather scaled by residual IQR.
CovComponents plugin_components(const Dataset& data, const Theta& theta,
                                QuantileLevel tau, double bandwidth = 0.0);

/// Assemble the profile-likelihood information blocks from the components
/// and invert; returns the max-abs deviation of the top-left block from
/// sigma_elw and of the bottom-right block from s_b^{-1}.  An exact matrix
/// identity: the residual is rounding-level for consistent inputs.
double block_identity_check(const CovComponents& c);

} // namespace elwqr
