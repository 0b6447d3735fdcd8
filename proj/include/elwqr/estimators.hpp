#pragma once

// The three point estimators: complete-case analysis, inverse-probability
// weighting under a MAR working assumption, and the EL-weighted estimator.

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "elwqr/dataset.hpp"
#include "elwqr/elweights.hpp"
#include "elwqr/missingness.hpp"
#include "elwqr/quantile.hpp"

namespace elwqr {

enum class EstimatorKind { cca, ipw_mar, elw };

const char* to_string(EstimatorKind k);
EstimatorKind estimator_from_string(const std::string& name);

struct FitResult {
  Eigen::VectorXd beta;
  EstimatorKind estimator = EstimatorKind::cca;
  double tau = 0.5;
  std::optional<MleFit> gamma_fit; // ipw_mar and elw
  std::optional<ELDiagnostics> el; // elw only
  QRSolution qr;
  // Full nuisance estimate (alpha, beta_cca, gamma); populated by fit_elw so
  // the plug-in covariance can be assembled without refitting.
  std::optional<Theta> theta;
};

/// Quantile regression on the complete cases with unit weights.
FitResult fit_cca(const Dataset& data, QuantileLevel tau);

/// Complete-case fit weighted by 1/pi for caller-supplied observation
/// probabilities (one per row).  Errors if any complete-case pi < 0.01.
FitResult fit_ipw_with_pi(const Dataset& data, QuantileLevel tau,
                          const Eigen::VectorXd& pi);

/// IPW fit with pi estimated by the logistic missingness MLE.  Biased when
/// missingness depends on the unobserved covariate itself; included as the
/// MAR comparison method.
FitResult fit_ipw_mar(const Dataset& data, QuantileLevel tau);

/// The EL-weighted estimator: complete-case fit, missingness MLE, working
/// model, moment matrix, Lagrange weights, then a weighted refit of the
/// complete cases.  Stage failures raise NumericalError with a stage tag.
FitResult fit_elw(const Dataset& data, QuantileLevel tau);

/// Dispatch by kind.
FitResult fit_estimator(const Dataset& data, QuantileLevel tau, EstimatorKind kind);

} // namespace elwqr
