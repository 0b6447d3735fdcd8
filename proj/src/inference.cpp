#include "elwqr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "elwqr/errors.hpp"
#include "elwqr/parallel.hpp"
#include "elwqr/rng.hpp"
#include "elwqr/stats.hpp"

namespace elwqr {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

// Solve M X = B for symmetric M with a conditioning guard.
Eigen::MatrixXd guarded_solve(const Eigen::MatrixXd& m, const Eigen::MatrixXd& b,
                              const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double emin = ev.cwiseAbs().minCoeff();
  if (!(emax > 0.0) || emin < emax / 1e12)
    throw NumericalError(std::string("plugin: singular or ill-conditioned block ") + name);
  Eigen::MatrixXd tmp = es.eigenvectors().transpose() * b;
  tmp = (tmp.array().colwise() / ev.array()).matrix();
  return es.eigenvectors() * tmp;
}

double interquartile_range(std::vector<double> v) {
  if (v.size() < 2) return 0.0;
  std::sort(v.begin(), v.end());
  auto quartile = [&](double q) {
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  return quartile(0.75) - quartile(0.25);
}

} // namespace

double hall_sheather_bandwidth(int n, double tau) {
  const double z = norm_quantile(0.975);
  const double q = norm_quantile(tau);
  const double num = 1.5 * norm_pdf(q) * norm_pdf(q);
  const double den = 2.0 * q * q + 1.0;
  return std::pow(static_cast<double>(n), -1.0 / 3.0) * std::pow(z, 2.0 / 3.0) *
         std::pow(num / den, 1.0 / 3.0);
}

BootstrapResult bootstrap_se(const Dataset& data, QuantileLevel tau,
                             EstimatorKind kind, int b, std::uint64_t seed,
                             int threads) {
  if (b < 2) throw std::invalid_argument("bootstrap_se: B must be >= 2");
  data.validate();
  (void)fit_estimator(data, tau, kind); // the base fit must succeed

  const int n = data.n();
  const int p = data.p();
  BootstrapResult out;
  out.b = b;
  out.seed = seed;
  out.replicates = Eigen::MatrixXd::Constant(b, p,
      std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(static_cast<size_t>(b), 0);

  parallel_for(b, threads, [&](int rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    Dataset resample;
    resample.dim_x = data.dim_x;
    resample.dim_z = data.dim_z;
    resample.rows.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      resample.rows.push_back(
          data.rows[static_cast<size_t>(rng.below(static_cast<std::uint64_t>(n)))]);
    try {
      FitResult fit = fit_estimator(resample, tau, kind);
      out.replicates.row(rep) = fit.beta.transpose();
      ok[static_cast<size_t>(rep)] = 1;
    } catch (const NumericalError&) {
      // dropped and counted
    } catch (const std::invalid_argument&) {
      // resample lost a delta class or complete cases; same treatment
    }
  });

  int n_ok = 0;
  for (char c : ok) n_ok += c;
  out.failures = b - n_ok;
  if (out.failures * 5 > b)
    throw NumericalError("bootstrap: more than 20% of replicates failed");

  Eigen::MatrixXd good(n_ok, p);
  int k = 0;
  for (int rep = 0; rep < b; ++rep)
    if (ok[static_cast<size_t>(rep)]) good.row(k++) = out.replicates.row(rep);

  Eigen::RowVectorXd mean = good.colwise().mean();
  Eigen::MatrixXd centered = good.rowwise() - mean;
  out.cov = (centered.transpose() * centered) / std::max(1, n_ok - 1);
  out.cov = symmetrize(out.cov);
  out.se = out.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

CovComponents plugin_components(const Dataset& data, const Theta& theta,
                                QuantileLevel tau, double bandwidth) {
  data.validate();
  const int n = data.n();
  const int p = data.p();
  const int q = 2 + data.dim_z;
  if (theta.beta.size() != p || theta.gamma.size() != q ||
      theta.alpha.alpha.rows() != p ||
      theta.alpha.alpha.cols() != static_cast<Eigen::Index>(theta.alpha.columns.size()) ||
      theta.alpha.columns.empty() ||
      theta.alpha.columns.back() >= working_basis_dim(data.dim_z))
    throw std::invalid_argument("plugin_components: theta dimensions inconsistent");

  // Kernel bandwidth from complete-case residuals.
  std::vector<double> resid;
  resid.reserve(static_cast<size_t>(data.n_complete()));
  for (int i = 0; i < n; ++i) {
    if (!data.rows[static_cast<size_t>(i)].delta) continue;
    const DesignRow row = data.design_row(i);
    resid.push_back(row.y - row.w.dot(theta.beta));
  }
  double h = bandwidth;
  if (h <= 0.0) {
    double spread = interquartile_range(resid);
    if (spread <= 0.0) {
      double m = 0.0, s2 = 0.0;
      for (double e : resid) m += e;
      m /= static_cast<double>(resid.size());
      for (double e : resid) s2 += (e - m) * (e - m);
      spread = 1.349 * std::sqrt(s2 / std::max<size_t>(1, resid.size() - 1));
    }
    if (spread <= 0.0)
      throw NumericalError("plugin: residual spread is zero; supply a bandwidth");
    h = spread * hall_sheather_bandwidth(static_cast<int>(resid.size()), tau.tau());
  }

  CovComponents c;
  c.bandwidth = h;
  c.f_beta = Eigen::MatrixXd::Zero(p, p);
  c.s_phi = Eigen::MatrixXd::Zero(p, p);
  c.d1 = Eigen::MatrixXd::Zero(p, p);
  c.d2 = Eigen::MatrixXd::Zero(p, q);
  c.d3 = Eigen::MatrixXd::Zero(p, p);
  c.d4 = Eigen::MatrixXd::Zero(p, q);
  c.s_b = Eigen::MatrixXd::Zero(q, q);

  for (int i = 0; i < n; ++i) {
    const Observation& obs = data.rows[static_cast<size_t>(i)];
    const double pi = pi_logistic(obs.y, obs.z, theta.gamma);
    const double dmp = (obs.delta ? 1.0 : 0.0) - pi;
    const Eigen::VectorXd m = theta.alpha.predict(working_basis(data, i));
    const Eigen::VectorXd u = dmp * data.yz_basis(i); // score contribution

    c.d1.noalias() += (dmp * dmp) * m * m.transpose();
    c.d2.noalias() += dmp * m * u.transpose();
    c.s_b.noalias() += u * u.transpose();

    if (obs.delta) {
      const DesignRow row = data.design_row(i);
      const double e = row.y - row.w.dot(theta.beta);
      const Eigen::VectorXd ph = phi(row, theta.beta, tau);
      c.f_beta.noalias() += (norm_pdf(e / h) / h) * row.w * row.w.transpose();
      c.s_phi.noalias() += ph * ph.transpose();
      c.d3.noalias() += dmp * ph * m.transpose();
      c.d4.noalias() += ph * u.transpose();
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  c.f_beta = symmetrize(c.f_beta * inv_n);
  c.s_phi = symmetrize(c.s_phi * inv_n);
  c.d1 = symmetrize(c.d1 * inv_n);
  c.d2 *= inv_n;
  c.d3 *= inv_n;
  c.d4 *= inv_n;
  c.s_b = symmetrize(c.s_b * inv_n);

  const Eigen::MatrixXd sbinv_d2t = guarded_solve(c.s_b, c.d2.transpose(), "S_B");
  c.v1 = c.d3 - c.d4 * sbinv_d2t;
  c.v2 = symmetrize(c.d1 - c.d2 * sbinv_d2t);

  const Eigen::MatrixXd finv_sphi =
      guarded_solve(c.f_beta, c.s_phi, "F_beta");
  c.sigma_cca = symmetrize(guarded_solve(c.f_beta, finv_sphi.transpose(), "F_beta"));

  const double v1_scale = c.v1.cwiseAbs().maxCoeff();
  const double block_scale =
      std::max({c.d1.cwiseAbs().maxCoeff(), c.d3.cwiseAbs().maxCoeff(), 1e-30});
  if (v1_scale <= 1e-13 * (1.0 + block_scale)) {
    // No estimable efficiency gain; the correction vanishes identically and
    // v2 may be singular here (all-zero g1 rows).
    c.sigma_elw = c.sigma_cca;
  } else {
    const Eigen::MatrixXd a = guarded_solve(c.f_beta, c.v1, "F_beta");
    const Eigen::MatrixXd v2inv_at = guarded_solve(c.v2, a.transpose(), "V2");
    c.sigma_elw = symmetrize(c.sigma_cca - a * v2inv_at);
  }
  return c;
}

double block_identity_check(const CovComponents& c) {
  const Eigen::Index p = c.f_beta.rows();
  const Eigen::Index q = c.s_b.rows();

  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(2 * p + q, p + q);
  s1.block(0, 0, p, p) = c.f_beta;
  s1.block(p, p, p, q) = c.d2;
  s1.block(p + p, p, q, q) = c.s_b;

  Eigen::MatrixXd s2(2 * p + q, 2 * p + q);
  s2.block(0, 0, p, p) = c.s_phi;
  s2.block(0, p, p, p) = c.d3;
  s2.block(0, p + p, p, q) = c.d4;
  s2.block(p, 0, p, p) = c.d3.transpose();
  s2.block(p, p, p, p) = c.d1;
  s2.block(p, p + p, p, q) = c.d2;
  s2.block(p + p, 0, q, p) = c.d4.transpose();
  s2.block(p + p, p, q, p) = c.d2.transpose();
  s2.block(p + p, p + p, q, q) = c.s_b;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(s2);
  if (!lu.isInvertible())
    throw NumericalError("block_identity_check: singular S2");
  const Eigen::MatrixXd m = s1.transpose() * lu.solve(s1);

  Eigen::FullPivLU<Eigen::MatrixXd> lum(m);
  if (!lum.isInvertible())
    throw NumericalError("block_identity_check: singular information matrix");
  const Eigen::MatrixXd minv = lum.inverse();

  Eigen::FullPivLU<Eigen::MatrixXd> lub(c.s_b);
  if (!lub.isInvertible())
    throw NumericalError("block_identity_check: singular S_B");

  const double top = (minv.topLeftCorner(p, p) - c.sigma_elw).cwiseAbs().maxCoeff();
  const double bottom =
      (minv.bottomRightCorner(q, q) - lub.inverse()).cwiseAbs().maxCoeff();
  return std::max(top, bottom);
}

} // namespace elwqr
