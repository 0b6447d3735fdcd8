#include "elwqr/simgen.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "elwqr/errors.hpp"
#include "elwqr/parallel.hpp"
#include "elwqr/rng.hpp"
#include "elwqr/stats.hpp"

namespace elwqr {

SimDesign SimDesign::benchmark_default() {
  SimDesign d;
  d.psi << 1.0, 0.5, 0.5,
           0.5, 1.0, 0.5,
           0.5, 0.5, 1.0;
  d.p_delta = 0.5;
  return d;
}

SimParams derive_params(const SimDesign& design, QuantileLevel tau) {
  const Eigen::Matrix3d& psi = design.psi;
  if ((psi - psi.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("derive_params: psi must be symmetric");
  const double sxx = psi(0, 0), szz = psi(1, 1), syy = psi(2, 2);
  const double sxz = psi(0, 1), sxy = psi(0, 2), szy = psi(1, 2);

  const double den1 = sxx * szz - sxz * sxz;
  const double den2 = szz * syy - szy * szy;
  if (den1 <= 0.0 || den2 <= 0.0)
    throw std::invalid_argument("derive_params: psi is not positive definite on the required blocks");

  SimParams out;
  out.tau = tau.tau();
  out.upsilon1 = 1.0 / den1;
  out.upsilon2 = 1.0 / den2;
  out.eta = (sxy * szz - sxz * szy) * out.upsilon1;

  const double beta1 = (sxy * szz - sxz * szy) * out.upsilon1;
  const double beta2 = (szy * sxx - sxz * sxy) * out.upsilon1;

  const double printed =
      syy - (sxz * sxz * szz - 2.0 * sxz * sxz * szy + szy * szy * sxx) * out.upsilon1;
  const double standard =
      syy - (sxy * sxy * szz - 2.0 * sxy * sxz * szy + szy * szy * sxx) * out.upsilon1;
  out.sigma_sq = design.sigma_form == SigmaSqForm::as_printed ? printed : standard;
  out.sigma_sq_alt = design.sigma_form == SigmaSqForm::as_printed ? standard : printed;
  if (!(out.sigma_sq > 0.0))
    throw std::invalid_argument("derive_params: nonpositive residual variance");

  out.beta_true[0] = std::sqrt(out.sigma_sq) * norm_quantile(tau.tau());
  out.beta_true[1] = beta1;
  out.beta_true[2] = beta2;

  out.gamma_true[0] = -0.5 * out.eta * out.eta * szz * out.upsilon2;
  out.gamma_true[1] = -out.eta * szy * out.upsilon2;
  out.gamma_true[2] = out.eta * szz * out.upsilon2;
  return out;
}

std::vector<FullRow> generate_full(const SimDesign& design, int n,
                                   std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_full: n must be >= 1");
  if (!(design.p_delta > 0.0 && design.p_delta < 1.0))
    throw std::invalid_argument("generate_full: p_delta must lie in (0,1)");
  Eigen::LLT<Eigen::Matrix3d> llt(design.psi);
  if (llt.info() != Eigen::Success)
    throw NumericalError("generate_full: Cholesky of psi failed (not PD)");
  const Eigen::Matrix3d chol = llt.matrixL();
  const double eta = derive_params(design, QuantileLevel(0.5)).eta;

  Rng rng(seed);
  std::vector<FullRow> rows(static_cast<size_t>(n));
  for (auto& row : rows) {
    row.delta = rng.bernoulli(design.p_delta);
    Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal());
    Eigen::Vector3d mean(row.delta ? 1.0 : 0.0, 0.0, row.delta ? eta : 0.0);
    const Eigen::Vector3d v = mean + chol * g;
    row.x = v[0];
    row.z = v[1];
    row.y = v[2];
  }
  return rows;
}

Dataset generate_dataset(const SimDesign& design, int n, std::uint64_t seed) {
  Dataset data;
  data.dim_x = 1;
  data.dim_z = 1;
  data.ensure_names();
  data.rows.reserve(static_cast<size_t>(n));
  for (const FullRow& full : generate_full(design, n, seed)) {
    Observation obs;
    obs.y = full.y;
    obs.z = Eigen::VectorXd::Constant(1, full.z);
    obs.delta = full.delta;
    if (full.delta) obs.x = Eigen::VectorXd::Constant(1, full.x);
    data.rows.push_back(std::move(obs));
  }
  return data;
}

MonteCarloResult monte_carlo_with_source(
    const SimDesign& design, int n, QuantileLevel tau, int reps,
    const std::vector<EstimatorKind>& kinds, std::uint64_t seed, int threads,
    const std::function<Dataset(int rep, std::uint64_t rep_seed)>& source) {
  if (reps < 2) throw std::invalid_argument("monte_carlo: reps must be >= 2");
  if (kinds.empty()) throw std::invalid_argument("monte_carlo: no estimators requested");

  const SimParams truth = derive_params(design, tau);
  const int p = 3;
  const int k = static_cast<int>(kinds.size());

  // errors(rep, estimator*p + j); NaN marks a failed fit
  Eigen::MatrixXd errors = Eigen::MatrixXd::Constant(
      reps, k * p, std::numeric_limits<double>::quiet_NaN());

  parallel_for(reps, threads, [&](int rep) {
    const std::uint64_t rep_seed = derive_seed(seed, static_cast<std::uint64_t>(rep));
    Dataset data = source(rep, rep_seed);
    for (int e = 0; e < k; ++e) {
      try {
        FitResult fit = fit_estimator(data, tau, kinds[static_cast<size_t>(e)]);
        errors.block(rep, e * p, 1, p) =
            (fit.beta - truth.beta_true).transpose();
      } catch (const NumericalError&) {
      } catch (const std::invalid_argument&) {
      }
    }
  });

  MonteCarloResult out;
  out.reps = reps;
  out.tau = tau.tau();
  out.n = n;
  for (int e = 0; e < k; ++e) {
    McEstimatorSummary s;
    s.kind = kinds[static_cast<size_t>(e)];
    s.bias = Eigen::VectorXd::Zero(p);
    s.rmse = Eigen::VectorXd::Zero(p);
    int used = 0;
    for (int rep = 0; rep < reps; ++rep) {
      if (std::isnan(errors(rep, e * p))) continue;
      ++used;
      for (int j = 0; j < p; ++j) {
        const double err = errors(rep, e * p + j);
        s.bias[j] += err;
        s.rmse[j] += err * err;
      }
    }
    s.reps_used = used;
    s.failures = reps - used;
    if (used > 0) {
      s.bias /= static_cast<double>(used);
      s.rmse = (s.rmse / static_cast<double>(used)).cwiseSqrt();
    }
    s.ok = s.failures * 20 <= reps; // more than 5% failures flags the row
    out.estimators.push_back(std::move(s));
  }
  return out;
}

MonteCarloResult monte_carlo(const SimDesign& design, int n, QuantileLevel tau,
                             int reps, const std::vector<EstimatorKind>& kinds,
                             std::uint64_t seed, int threads) {
  return monte_carlo_with_source(
      design, n, tau, reps, kinds, seed, threads,
      [&](int, std::uint64_t rep_seed) {
        return generate_dataset(design, n, rep_seed);
      });
}

} // namespace elwqr
