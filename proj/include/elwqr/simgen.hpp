#pragma once

// Conditional-Gaussian data generator with nonignorable missingness, the
// closed-form true parameters it implies, and the Monte Carlo harness that
// produces bias/RMSE tables over replicated fits.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "elwqr/dataset.hpp"
#include "elwqr/estimators.hpp"

namespace elwqr {

// Two algebraic forms of the conditional variance of y given (x, z); they
// coincide under the default covariance but are both exposed because they
// differ for general input.
enum class SigmaSqForm { as_printed, standard_conditional };

struct SimDesign {
  // Covariance of (x, z, y) given delta, entries sigma_ab for a,b in {x,z,y}.
  Eigen::Matrix3d psi = Eigen::Matrix3d::Identity();
  double p_delta = 0.5;
  SigmaSqForm sigma_form = SigmaSqForm::as_printed;

  // The benchmark simulation setting: unit variances, all correlations 0.5.
  static SimDesign benchmark_default();
};

struct SimParams {
  double tau = 0.5;
  double eta = 0.0;
  double upsilon1 = 0.0;
  double upsilon2 = 0.0;
  double sigma_sq = 0.0;     // selected form
  double sigma_sq_alt = 0.0; // the other form, as a diagnostic
  // True quantile coefficients for W = (1, x, z).
  Eigen::Vector3d beta_true = Eigen::Vector3d::Zero();
  // True observed-data logistic parameters in basis (1, z, y).
  Eigen::Vector3d gamma_true = Eigen::Vector3d::Zero();

  // gamma_true reordered to the missingness-model basis (1, y, z).
  Eigen::Vector3d gamma_in_yz_basis() const {
    return Eigen::Vector3d(gamma_true[0], gamma_true[2], gamma_true[1]);
  }
};

/// Closed-form derived parameters for the design at quantile level tau.
/// Throws std::invalid_argument when the required covariance blocks are not
/// positive definite.
SimParams derive_params(const SimDesign& design, QuantileLevel tau);

// A generated unit before masking; kept for tests that need the latent x.
struct FullRow {
  double x = 0.0, z = 0.0, y = 0.0;
  bool delta = false;
};

/// The raw stream: delta ~ Bernoulli(p_delta), then (x,z,y) from the
/// conditional normal with mean (delta, 0, eta*delta).  Deterministic in
/// the seed.
std::vector<FullRow> generate_full(const SimDesign& design, int n,
                                   std::uint64_t seed);

/// Same stream with x discarded (not stored) on delta = 0 rows.
Dataset generate_dataset(const SimDesign& design, int n, std::uint64_t seed);

struct McEstimatorSummary {
  EstimatorKind kind = EstimatorKind::cca;
  Eigen::VectorXd bias;
  Eigen::VectorXd rmse;
  int failures = 0;
  int reps_used = 0;
  bool ok = true; // false once failures exceed 5% of requested reps
};

struct MonteCarloResult {
  std::vector<McEstimatorSummary> estimators;
  int reps = 0;
  double tau = 0.5;
  int n = 0;
};

/// Replicated generate/fit/aggregate loop.  Each replication r draws its
/// dataset from derive_seed(seed, r), so the table does not depend on the
/// number of worker threads.  Failed replications are excluded per
/// estimator and counted.
MonteCarloResult monte_carlo(const SimDesign& design, int n, QuantileLevel tau,
                             int reps, const std::vector<EstimatorKind>& kinds,
                             std::uint64_t seed, int threads = 0);

/// Test hook: identical harness with a caller-supplied dataset source.
MonteCarloResult monte_carlo_with_source(
    const SimDesign& design, int n, QuantileLevel tau, int reps,
    const std::vector<EstimatorKind>& kinds, std::uint64_t seed, int threads,
    const std::function<Dataset(int rep, std::uint64_t rep_seed)>& source);

} // namespace elwqr
