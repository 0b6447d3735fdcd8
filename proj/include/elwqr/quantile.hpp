#pragma once

// Quantile (check) loss, the quantile score function, and an exact
// weighted quantile-regression solver.  Every estimator in the library is a
// weighted call into solve_weighted_qr.

#include <Eigen/Dense>
#include <vector>

namespace elwqr {

// Quantile level restricted to the open interval (0,1).
class QuantileLevel {
public:
  explicit QuantileLevel(double tau);
  double tau() const { return tau_; }

private:
  double tau_;
};

// One observation of a linear quantile model: w = (1, x', z')', response y.
struct DesignRow {
  Eigen::VectorXd w;
  double y = 0.0;
};

enum class QRStatus { converged, max_iter, degenerate };

struct QRSolution {
  Eigen::VectorXd beta;
  double objective = 0.0; // weighted check loss at beta
  int iterations = 0;     // simplex pivots
  QRStatus status = QRStatus::degenerate;
};

const char* to_string(QRStatus s);

/// rho_tau(u) = u * (tau - 1{u < 0}).  Nonnegative, zero iff u == 0.
double check_loss(double u, QuantileLevel tau);

/// Quantile score: w * (1{y - w'beta < 0} - tau).  The indicator is strict,
/// so a zero residual contributes -tau * w.
Eigen::VectorXd phi(const DesignRow& row, const Eigen::VectorXd& beta,
                    QuantileLevel tau);

/// Smallest v with normalized cumulative weight of {values <= v} >= tau;
/// equivalently a minimizer of sum_i weights_i * rho_tau(values_i - c).
double weighted_quantile(const Eigen::VectorXd& values,
                         const Eigen::VectorXd& weights, QuantileLevel tau);

/// Total weighted check loss of `beta` on `rows`.
double weighted_check_loss(const std::vector<DesignRow>& rows,
                           const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& beta, QuantileLevel tau);

/// Minimize sum_i weights_i * rho_tau(y_i - w_i'beta) exactly.
///
/// Exterior-point simplex over exact-fit bases: an optimal solution
/// interpolates p observations, and the solver pivots between such bases
/// until the subgradient optimality certificate holds.  Rows with weight
/// below 1e-14 are dropped up front.  A rank-deficient positively-weighted
/// design yields status degenerate (beta zeroed); non-finite input throws.
QRSolution solve_weighted_qr(const std::vector<DesignRow>& rows,
                             const Eigen::VectorXd& weights,
                             QuantileLevel tau);

} // namespace elwqr
