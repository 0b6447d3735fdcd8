#include "elwqr/estimators.hpp"

#include <stdexcept>

#include "elwqr/errors.hpp"

namespace elwqr {

const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::cca: return "cca";
    case EstimatorKind::ipw_mar: return "ipw_mar";
    case EstimatorKind::elw: return "elw";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "cca") return EstimatorKind::cca;
  if (name == "ipw_mar" || name == "ipw") return EstimatorKind::ipw_mar;
  if (name == "elw") return EstimatorKind::elw;
  throw std::invalid_argument("unknown estimator: " + name);
}

namespace {

// Weighted QR over the complete cases; incomplete rows get weight zero.
QRSolution complete_case_qr(const Dataset& data, QuantileLevel tau,
                            const Eigen::VectorXd& row_weights,
                            const std::string& stage) {
  std::vector<DesignRow> rows;
  std::vector<double> w;
  for (int i = 0; i < data.n(); ++i) {
    if (!data.rows[static_cast<size_t>(i)].delta) continue;
    rows.push_back(data.design_row(i));
    w.push_back(row_weights[i]);
  }
  if (static_cast<int>(rows.size()) < data.p())
    throw std::invalid_argument(stage + ": fewer complete cases than parameters");
  Eigen::VectorXd wv = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  QRSolution qr = solve_weighted_qr(rows, wv, tau);
  if (qr.status == QRStatus::degenerate)
    throw NumericalError(stage + ": degenerate weighted design");
  if (qr.status == QRStatus::max_iter)
    throw NumericalError(stage + ": weighted QR did not converge");
  return qr;
}

} // namespace

FitResult fit_cca(const Dataset& data, QuantileLevel tau) {
  data.validate();
  FitResult out;
  out.estimator = EstimatorKind::cca;
  out.tau = tau.tau();
  out.qr = complete_case_qr(data, tau, Eigen::VectorXd::Ones(data.n()), "cca");
  out.beta = out.qr.beta;
  return out;
}

FitResult fit_ipw_with_pi(const Dataset& data, QuantileLevel tau,
                          const Eigen::VectorXd& pi) {
  data.validate();
  if (pi.size() != data.n())
    throw std::invalid_argument("fit_ipw_with_pi: pi length mismatch");
  for (int i = 0; i < data.n(); ++i) {
    if (data.rows[static_cast<size_t>(i)].delta && pi[i] < 0.01)
      throw NumericalError("ipw: fitted observation probability below 0.01");
  }
  FitResult out;
  out.estimator = EstimatorKind::ipw_mar;
  out.tau = tau.tau();
  out.qr = complete_case_qr(data, tau, pi.cwiseInverse(), "ipw");
  out.beta = out.qr.beta;
  return out;
}

FitResult fit_ipw_mar(const Dataset& data, QuantileLevel tau) {
  MleFit mle = fit_gamma_mle(data);
  if (mle.status != MleStatus::converged)
    throw NumericalError(std::string("ipw/gamma: missingness MLE ") + to_string(mle.status));
  FitResult out = fit_ipw_with_pi(data, tau, fitted_pi(data, mle.gamma));
  out.gamma_fit = std::move(mle);
  return out;
}

FitResult fit_elw(const Dataset& data, QuantileLevel tau) {
  FitResult cca = fit_cca(data, tau);

  MleFit mle = fit_gamma_mle(data);
  if (mle.status != MleStatus::converged)
    throw NumericalError(std::string("elw/gamma: missingness MLE ") + to_string(mle.status));

  Theta theta;
  theta.alpha = fit_working_model(data, cca.beta, tau);
  theta.beta = cca.beta;
  theta.gamma = mle.gamma;

  Eigen::MatrixXd G = build_g(data, theta);
  ELDiagnostics el = solve_lambda(G);
  if (el.status == ELStatus::infeasible)
    throw NumericalError(
        "elw/lambda: moment conditions infeasible (zero outside the convex hull); "
        "the complete-case fit is the available fallback");
  if (el.status == ELStatus::max_iter)
    throw NumericalError("elw/lambda: Lagrange solve did not converge");

  FitResult out;
  out.estimator = EstimatorKind::elw;
  out.tau = tau.tau();
  out.qr = complete_case_qr(data, tau, el.weights, "elw/qr");
  out.beta = out.qr.beta;
  out.gamma_fit = std::move(mle);
  out.el = std::move(el);
  out.theta = std::move(theta);
  return out;
}

FitResult fit_estimator(const Dataset& data, QuantileLevel tau, EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::cca: return fit_cca(data, tau);
    case EstimatorKind::ipw_mar: return fit_ipw_mar(data, tau);
    case EstimatorKind::elw: return fit_elw(data, tau);
  }
  throw std::invalid_argument("fit_estimator: bad kind");
}

} // namespace elwqr
