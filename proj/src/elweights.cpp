#include "elwqr/elweights.hpp"

#include <cmath>
#include <stdexcept>

#include "elwqr/errors.hpp"

namespace elwqr {

const char* to_string(ELStatus s) {
  switch (s) {
    case ELStatus::converged: return "converged";
    case ELStatus::infeasible: return "infeasible";
    case ELStatus::max_iter: return "max_iter";
  }
  return "?";
}

Eigen::MatrixXd least_squares_rows(const Eigen::MatrixXd& H,
                                   const Eigen::MatrixXd& targets) {
  if (H.rows() != targets.rows())
    throw std::invalid_argument("least_squares_rows: row count mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(H);
  if (qr.rank() < H.cols())
    throw NumericalError("working_model: rank-deficient basis");
  Eigen::MatrixXd coef = qr.solve(targets); // s x p
  return coef.transpose();                  // p x s
}

int working_basis_dim(int dim_z) {
  const int linear = 1 + dim_z; // y and z
  return 1 + linear + linear * (linear + 1) / 2;
}

Eigen::VectorXd working_basis(const Dataset& data, int i) {
  const Observation& row = data.rows[static_cast<size_t>(i)];
  const int linear = 1 + data.dim_z;
  Eigen::VectorXd v(linear);
  v[0] = row.y;
  v.tail(data.dim_z) = row.z;

  Eigen::VectorXd h(working_basis_dim(data.dim_z));
  h[0] = 1.0;
  h.segment(1, linear) = v;
  int k = 1 + linear;
  for (int a = 0; a < linear; ++a)
    for (int b = a; b < linear; ++b) h[k++] = v[a] * v[b];
  return h;
}

WorkingModel fit_working_model(const Dataset& data, const Eigen::VectorXd& beta_c,
                               QuantileLevel tau) {
  data.validate();
  const int n = data.n();
  const int p = data.p();
  const int s = working_basis_dim(data.dim_z);
  if (beta_c.size() != p)
    throw std::invalid_argument("fit_working_model: beta dimension mismatch");

  Eigen::MatrixXd H(n, s);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, p);
  for (int i = 0; i < n; ++i) {
    H.row(i) = working_basis(data, i).transpose();
    if (data.rows[static_cast<size_t>(i)].delta)
      targets.row(i) = phi(data.design_row(i), beta_c, tau).transpose();
  }

  // The linear block (1, y, z) must be full rank; that part of the contract
  // is not negotiable since the score block lives there.
  const int linear_dim = 2 + data.dim_z;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_lin(H.leftCols(linear_dim));
  if (qr_lin.rank() < linear_dim)
    throw NumericalError("working_model: rank-deficient basis");

  // Quadratic columns that duplicate other columns (a z column that is
  // already a square or product, say) are pruned by pivoted QR.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(H);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> keep(qr.colsPermutation().indices().data(),
                        qr.colsPermutation().indices().data() + rank);
  std::sort(keep.begin(), keep.end());

  WorkingModel wm;
  wm.columns = std::move(keep);
  Eigen::MatrixXd Hkeep(n, static_cast<Eigen::Index>(wm.columns.size()));
  for (size_t k = 0; k < wm.columns.size(); ++k)
    Hkeep.col(static_cast<Eigen::Index>(k)) = H.col(wm.columns[k]);
  if (data.n_complete() < static_cast<int>(wm.columns.size()))
    throw std::invalid_argument("fit_working_model: fewer complete cases than basis dim");
  wm.alpha = least_squares_rows(Hkeep, targets);
  return wm;
}

Eigen::VectorXd g_row(int delta, double pi, const Eigen::VectorXd& m,
                      const Eigen::VectorXd& yz_basis) {
  const double resid = static_cast<double>(delta) - pi;
  Eigen::VectorXd g(m.size() + yz_basis.size());
  g.head(m.size()) = resid * m;
  g.tail(yz_basis.size()) = resid * yz_basis;
  return g;
}

Eigen::MatrixXd build_g(const Dataset& data, const Theta& theta) {
  const int n = data.n();
  const int p = data.p();
  const int q = 2 + data.dim_z;
  if (theta.alpha.alpha.rows() != p ||
      theta.alpha.alpha.cols() != static_cast<Eigen::Index>(theta.alpha.columns.size()) ||
      theta.alpha.columns.empty() ||
      theta.alpha.columns.back() >= working_basis_dim(data.dim_z))
    throw std::invalid_argument("build_g: working model shape mismatch");
  if (theta.gamma.size() != q)
    throw std::invalid_argument("build_g: gamma dimension mismatch");

  Eigen::MatrixXd G(n, p + q);
  for (int i = 0; i < n; ++i) {
    const Observation& row = data.rows[static_cast<size_t>(i)];
    const double pi = pi_logistic(row.y, row.z, theta.gamma);
    G.row(i) = g_row(row.delta ? 1 : 0, pi,
                     theta.alpha.predict(working_basis(data, i)),
                     data.yz_basis(i))
                   .transpose();
  }
  return G;
}

namespace {

double el_objective(const Eigen::VectorXd& denom) {
  return denom.array().log().sum();
}

} // namespace

ELDiagnostics solve_lambda(const Eigen::MatrixXd& G) {
  const Eigen::Index n = G.rows();
  const Eigen::Index r = G.cols();
  if (n <= r)
    throw std::invalid_argument("solve_lambda: needs more rows than moment dimensions");
  if (!G.allFinite())
    throw std::invalid_argument("solve_lambda: non-finite moment matrix");

  const double floor = 1.0 / static_cast<double>(n); // domain safeguard
  constexpr double kGradTol = 1e-10;
  constexpr int kMaxIter = 100;

  ELDiagnostics diag;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd denom = Eigen::VectorXd::Ones(n);
  double obj = 0.0;
  int stall = 0;

  auto mean_grad = [&](const Eigen::VectorXd& d) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(r);
    for (Eigen::Index i = 0; i < n; ++i) g += G.row(i).transpose() / d[i];
    return Eigen::VectorXd(g / static_cast<double>(n));
  };

  auto finish = [&](ELStatus status, int iters) {
    diag.lambda = lambda;
    diag.weights = (denom * static_cast<double>(n)).cwiseInverse();
    diag.constraint_residual = mean_grad(denom).lpNorm<Eigen::Infinity>();
    diag.min_denominator = denom.minCoeff();
    diag.iterations = iters;
    diag.status = status;
    return diag;
  };

  for (int iter = 0; iter <= kMaxIter; ++iter) {
    Eigen::VectorXd grad = mean_grad(denom);
    if (grad.lpNorm<Eigen::Infinity>() < kGradTol) {
      // Polish: Newton converges quadratically here, so one or two extra
      // steps push the constraint residual to rounding level.
      for (int extra = 0; extra < 2; ++extra) {
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(r, r);
        for (Eigen::Index i = 0; i < n; ++i)
          hess.noalias() += G.row(i).transpose() * G.row(i) / (denom[i] * denom[i]);
        hess /= static_cast<double>(n);
        hess.diagonal().array() += 1e-14 * (1.0 + hess.trace());
        Eigen::VectorXd cand = lambda + hess.ldlt().solve(grad);
        Eigen::VectorXd cand_denom = Eigen::VectorXd::Ones(n) + G * cand;
        if (cand_denom.minCoeff() < floor) break;
        Eigen::VectorXd cand_grad = mean_grad(cand_denom);
        if (cand_grad.lpNorm<Eigen::Infinity>() >= grad.lpNorm<Eigen::Infinity>()) break;
        lambda = cand;
        denom = cand_denom;
        grad = cand_grad;
      }
      return finish(ELStatus::converged, iter);
    }
    if (iter == kMaxIter) break;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index i = 0; i < n; ++i)
      hess.noalias() += G.row(i).transpose() * G.row(i) / (denom[i] * denom[i]);
    hess /= static_cast<double>(n);
    hess.diagonal().array() += 1e-14 * (1.0 + hess.trace());
    Eigen::VectorXd step = hess.ldlt().solve(grad);

    bool accepted = false;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-6) {
      // Inside the quadratic basin the per-step objective gain sits below
      // floating-point resolution and an Armijo test can no longer see
      // genuine Newton progress; accept the full step on gradient decrease.
      Eigen::VectorXd cand = lambda + step;
      Eigen::VectorXd cand_denom = Eigen::VectorXd::Ones(n) + G * cand;
      if (cand_denom.minCoeff() >= floor &&
          mean_grad(cand_denom).lpNorm<Eigen::Infinity>() <
              grad.lpNorm<Eigen::Infinity>()) {
        lambda = cand;
        denom = cand_denom;
        obj = el_objective(cand_denom);
        accepted = true;
      }
    }
    if (!accepted) {
      // Step-halving on the objective; steps too small to move the iterate
      // are not counted as progress.
      double t = 1.0;
      for (int h = 0; h < 30; ++h) {
        Eigen::VectorXd cand = lambda + t * step;
        Eigen::VectorXd cand_denom = Eigen::VectorXd::Ones(n) + G * cand;
        if (cand_denom.minCoeff() >= floor) {
          const double cand_obj = el_objective(cand_denom);
          if (cand_obj >= obj) {
            lambda = cand;
            denom = cand_denom;
            obj = cand_obj;
            accepted = true;
            break;
          }
        }
        t *= 0.5;
      }
    }
    if (!accepted) {
      if (++stall >= 5) return finish(ELStatus::infeasible, iter);
      continue;
    }
    stall = 0;
    // Unbounded ascent means zero escaped the convex hull of the rows.
    if (denom.maxCoeff() > 1e7 * static_cast<double>(n))
      return finish(ELStatus::infeasible, iter);
  }
  return finish(ELStatus::max_iter, kMaxIter);
}

Eigen::VectorXd el_weights(const Eigen::MatrixXd& G, const Eigen::VectorXd& lambda) {
  if (lambda.size() != G.cols())
    throw std::invalid_argument("el_weights: lambda dimension mismatch");
  const Eigen::Index n = G.rows();
  Eigen::VectorXd denom = Eigen::VectorXd::Ones(n) + G * lambda;
  if (denom.minCoeff() <= 0.0)
    throw std::invalid_argument("el_weights: nonpositive denominator");
  return (denom * static_cast<double>(n)).cwiseInverse();
}

} // namespace elwqr
