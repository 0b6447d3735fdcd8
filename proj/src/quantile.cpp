#include "elwqr/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <stdexcept>

namespace elwqr {

namespace {
constexpr double kWeightDropTol = 1e-14; // rows below this weight are dropped
}

QuantileLevel::QuantileLevel(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("QuantileLevel: tau must lie strictly in (0,1)");
}

const char* to_string(QRStatus s) {
  switch (s) {
    case QRStatus::converged: return "converged";
    case QRStatus::max_iter: return "max_iter";
    case QRStatus::degenerate: return "degenerate";
  }
  return "?";
}

double check_loss(double u, QuantileLevel tau) {
  if (!std::isfinite(u))
    throw std::invalid_argument("check_loss: non-finite input");
  return u < 0.0 ? u * (tau.tau() - 1.0) : u * tau.tau();
}

Eigen::VectorXd phi(const DesignRow& row, const Eigen::VectorXd& beta,
                    QuantileLevel tau) {
  if (row.w.size() != beta.size())
    throw std::invalid_argument("phi: dimension mismatch between w and beta");
  const double resid = row.y - row.w.dot(beta);
  const double ind = resid < 0.0 ? 1.0 : 0.0;
  return row.w * (ind - tau.tau());
}

double weighted_quantile(const Eigen::VectorXd& values,
                         const Eigen::VectorXd& weights, QuantileLevel tau) {
  const Eigen::Index m = values.size();
  if (m == 0) throw std::invalid_argument("weighted_quantile: empty input");
  if (weights.size() != m)
    throw std::invalid_argument("weighted_quantile: length mismatch");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(weights[i]) || weights[i] < 0.0)
      throw std::invalid_argument("weighted_quantile: invalid value or weight");
  }
  const double total = weights.sum();
  if (!(total > 0.0))
    throw std::invalid_argument("weighted_quantile: zero total weight");

  std::vector<Eigen::Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return values[a] < values[b];
  });

  const double threshold = tau.tau() * total - 1e-12 * total;
  double cum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    const double v = values[order[i]];
    while (j < order.size() && values[order[j]] == v) cum += weights[order[j++]];
    if (cum >= threshold) return v;
    i = j;
  }
  return values[order.back()];
}

double weighted_check_loss(const std::vector<DesignRow>& rows,
                           const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& beta, QuantileLevel tau) {
  double obj = 0.0;
  for (size_t i = 0; i < rows.size(); ++i) {
    const double r = rows[i].y - rows[i].w.dot(beta);
    obj += weights[static_cast<Eigen::Index>(i)] * check_loss(r, tau);
  }
  return obj;
}

namespace {

void validate_qr_input(const std::vector<DesignRow>& rows,
                       const Eigen::VectorXd& weights) {
  if (rows.empty()) throw std::invalid_argument("solve_weighted_qr: no rows");
  if (weights.size() != static_cast<Eigen::Index>(rows.size()))
    throw std::invalid_argument("solve_weighted_qr: weight length mismatch");
  const Eigen::Index p = rows.front().w.size();
  for (size_t i = 0; i < rows.size(); ++i) {
    const DesignRow& row = rows[i];
    if (row.w.size() != p)
      throw std::invalid_argument("solve_weighted_qr: inconsistent row dimension");
    if (!row.w.allFinite() || !std::isfinite(row.y))
      throw std::invalid_argument("solve_weighted_qr: non-finite design entry");
    if (std::fabs(row.w[0] - 1.0) > 1e-12)
      throw std::invalid_argument("solve_weighted_qr: design row must start with 1");
    const double wi = weights[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(wi) || wi < 0.0)
      throw std::invalid_argument("solve_weighted_qr: weights must be finite and >= 0");
  }
}

// Greedily pick rows (in the given preference order) whose design vectors
// are linearly independent; returns basis row indices, or fewer than p if
// the design is rank deficient.
std::vector<Eigen::Index> greedy_basis(const Eigen::MatrixXd& X,
                                       const std::vector<Eigen::Index>& order) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd Q(p, p);
  std::vector<Eigen::Index> basis;
  for (Eigen::Index idx : order) {
    Eigen::VectorXd v = X.row(idx).transpose();
    const double scale = v.norm();
    if (scale <= 0.0) continue;
    for (size_t k = 0; k < basis.size(); ++k)
      v -= Q.col(static_cast<Eigen::Index>(k)).dot(v) * Q.col(static_cast<Eigen::Index>(k));
    if (v.norm() > 1e-9 * scale) {
      Q.col(static_cast<Eigen::Index>(basis.size())) = v / v.norm();
      basis.push_back(idx);
      if (static_cast<Eigen::Index>(basis.size()) == p) break;
    }
  }
  return basis;
}

// A few IRLS sweeps on a smoothed check loss; used only to order rows by
// residual magnitude so that the simplex starts near the solution.
Eigen::VectorXd irls_start(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w, double tau) {
  const Eigen::Index p = X.cols();
  const double yscale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double floor_r = 1e-6 * yscale;
  Eigen::VectorXd u = w;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int sweep = 0; sweep < 8; ++sweep) {
    Eigen::MatrixXd A = X.transpose() * u.asDiagonal() * X;
    A.diagonal().array() += 1e-10 * (1.0 + A.diagonal().maxCoeff());
    Eigen::VectorXd b = X.transpose() * (u.asDiagonal() * y);
    beta = A.ldlt().solve(b);
    Eigen::VectorXd r = y - X * beta;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double asym = r[i] < 0.0 ? 1.0 - tau : tau;
      u[i] = w[i] * asym / std::max(std::fabs(r[i]), floor_r);
    }
  }
  return beta;
}

} // namespace

QRSolution solve_weighted_qr(const std::vector<DesignRow>& rows,
                             const Eigen::VectorXd& weights,
                             QuantileLevel tau_level) {
  validate_qr_input(rows, weights);
  const double tau = tau_level.tau();
  const Eigen::Index p = rows.front().w.size();

  // Drop negligible weights and merge exact duplicate observations (same w
  // and y) by summing their weights.  Bootstrap resamples are dominated by
  // duplicates, which otherwise stack degenerate simplex pivots.
  std::vector<Eigen::Index> active;
  std::vector<double> merged_w;
  {
    std::unordered_map<std::string, size_t> seen;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows.size()); ++i) {
      if (!(weights[i] > kWeightDropTol)) continue;
      const DesignRow& row = rows[static_cast<size_t>(i)];
      std::string key(reinterpret_cast<const char*>(&row.y), sizeof(double));
      key.append(reinterpret_cast<const char*>(row.w.data()),
                 sizeof(double) * static_cast<size_t>(p));
      auto [it, inserted] = seen.emplace(key, active.size());
      if (inserted) {
        active.push_back(i);
        merged_w.push_back(weights[i]);
      } else {
        merged_w[it->second] += weights[i];
      }
    }
  }

  QRSolution out;
  out.beta = Eigen::VectorXd::Zero(p);
  const Eigen::Index m = static_cast<Eigen::Index>(active.size());
  if (m < p) {
    out.objective = weighted_check_loss(rows, weights, out.beta, tau_level);
    return out; // degenerate
  }

  Eigen::MatrixXd X(m, p);
  Eigen::VectorXd y(m), w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X.row(i) = rows[static_cast<size_t>(active[i])].w.transpose();
    y[i] = rows[static_cast<size_t>(active[i])].y;
    w[i] = merged_w[static_cast<size_t>(i)];
  }

  // Preference order for the initial basis: small |residual| of an IRLS
  // warm start on large problems, natural order otherwise.
  std::vector<Eigen::Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (m >= 500) {
    Eigen::VectorXd beta0 = irls_start(X, y, w, tau);
    Eigen::VectorXd r0 = (y - X * beta0).cwiseAbs();
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return r0[a] < r0[b];
    });
  }
  std::vector<Eigen::Index> basis = greedy_basis(X, order);
  if (static_cast<Eigen::Index>(basis.size()) < p) {
    out.objective = weighted_check_loss(rows, weights, out.beta, tau_level);
    return out; // degenerate design
  }

  const double yscale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double ztol = 1e-9 * yscale;
  double wx_scale = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    wx_scale += w[i] * X.row(i).cwiseAbs().maxCoeff();
  const double opt_tol = 1e-12 * (1.0 + wx_scale);

  const int max_pivots =
      std::max<int>(200, 10 * static_cast<int>(m) * static_cast<int>(p));
  Eigen::MatrixXd Xb(p, p);
  Eigen::VectorXd yb(p), beta(p), r(m);
  int degenerate_streak = 0;
  bool converged = false;
  int pivots = 0;

  while (pivots < max_pivots) {
    for (Eigen::Index k = 0; k < p; ++k) {
      Xb.row(k) = X.row(basis[static_cast<size_t>(k)]);
      yb[k] = y[basis[static_cast<size_t>(k)]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Xb);
    if (lu.rcond() < 1e-14) {
      out.beta = Eigen::VectorXd::Zero(p);
      out.objective = weighted_check_loss(rows, weights, out.beta, tau_level);
      out.iterations = pivots;
      out.status = QRStatus::degenerate;
      return out;
    }
    beta = lu.solve(yb);
    r = y - X * beta;
    for (Eigen::Index k = 0; k < p; ++k) r[basis[static_cast<size_t>(k)]] = 0.0;

    // Directional derivatives along the 2p basis directions.
    Eigen::MatrixXd Dmat = lu.inverse();
    Eigen::MatrixXd C = X * Dmat; // C(i,k) = x_i' d_k
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::fabs(r[i]) <= ztol) continue; // basic or degenerate: kink terms
      const double psi = tau - (r[i] < 0.0 ? 1.0 : 0.0);
      g.noalias() += (w[i] * psi) * C.row(i).transpose();
    }

    int best_k = -1;
    double best_sign = 1.0, best_val = -opt_tol;
    const bool bland = degenerate_streak >= 30;
    for (Eigen::Index k = 0; k < p; ++k) {
      const double wb = w[basis[static_cast<size_t>(k)]];
      const double dplus = wb * (1.0 - tau) - g[k];
      const double dminus = wb * tau + g[k];
      if (bland) {
        if (dplus < -opt_tol) { best_k = static_cast<int>(k); best_sign = 1.0; break; }
        if (dminus < -opt_tol) { best_k = static_cast<int>(k); best_sign = -1.0; break; }
      } else {
        if (dplus < best_val) { best_val = dplus; best_k = static_cast<int>(k); best_sign = 1.0; }
        if (dminus < best_val) { best_val = dminus; best_k = static_cast<int>(k); best_sign = -1.0; }
      }
    }
    if (best_k < 0) { converged = true; break; }

    const double descent = best_sign > 0
        ? w[basis[static_cast<size_t>(best_k)]] * (1.0 - tau) - g[best_k]
        : w[basis[static_cast<size_t>(best_k)]] * tau + g[best_k];
    Eigen::VectorXd c = best_sign * C.col(best_k);
    const double cscale = std::max(1.0, c.cwiseAbs().maxCoeff());
    const double ctol = 1e-12 * cscale;

    // True one-sided slope: add the kinks of degenerate (zero-residual,
    // nonbasic) rows, which the certificate above deliberately excluded.
    double slope = descent;
    bool has_degenerate = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::fabs(r[i]) > ztol || std::fabs(c[i]) <= ctol) continue;
      bool in_basis = false;
      for (Eigen::Index k = 0; k < p; ++k)
        if (basis[static_cast<size_t>(k)] == i) { in_basis = true; break; }
      if (in_basis) continue;
      slope += w[i] * (c[i] > 0.0 ? c[i] * (1.0 - tau) : -c[i] * tau);
      has_degenerate = true;
    }

    Eigen::Index entering = -1;
    if (slope >= 0.0 && has_degenerate) {
      // Degenerate pivot: exchange with the lowest-index blocking row.
      for (Eigen::Index i = 0; i < m && entering < 0; ++i) {
        if (std::fabs(r[i]) > ztol || std::fabs(c[i]) <= ctol) continue;
        bool in_basis = false;
        for (Eigen::Index k = 0; k < p; ++k)
          if (basis[static_cast<size_t>(k)] == i) { in_basis = true; break; }
        if (!in_basis) entering = i;
      }
      ++degenerate_streak;
    } else {
      // Walk the breakpoints of the piecewise-linear section until the
      // slope turns nonnegative.
      std::vector<std::pair<double, Eigen::Index>> bp;
      bp.reserve(static_cast<size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i) {
        if (std::fabs(c[i]) <= ctol || std::fabs(r[i]) <= ztol) continue;
        const double t = r[i] / c[i];
        if (t > 0.0) bp.emplace_back(t, i);
      }
      std::sort(bp.begin(), bp.end());
      double cum = slope;
      for (size_t j = 0; j < bp.size(); ++j) {
        cum += w[bp[j].second] * std::fabs(c[bp[j].second]);
        if (cum >= 0.0) {
          // Among breakpoints tied at this t, prefer the best-conditioned.
          size_t pick = j;
          for (size_t k = j + 1; k < bp.size() &&
               bp[k].first <= bp[j].first * (1.0 + 1e-12); ++k)
            if (std::fabs(c[bp[k].second]) > std::fabs(c[bp[pick].second])) pick = k;
          entering = bp[pick].second;
          break;
        }
      }
      degenerate_streak = 0;
    }

    if (entering < 0) {
      // No admissible exchange: numerical dead end.
      break;
    }
    basis[static_cast<size_t>(best_k)] = entering;
    ++pivots;
  }

  if (!converged) {
    // realign beta with the final basis before reporting the stalled state
    for (Eigen::Index k = 0; k < p; ++k) {
      Xb.row(k) = X.row(basis[static_cast<size_t>(k)]);
      yb[k] = y[basis[static_cast<size_t>(k)]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Xb);
    if (lu.rcond() >= 1e-14) beta = lu.solve(yb);
  }
  out.beta = beta;
  out.objective = weighted_check_loss(rows, weights, beta, tau_level);
  out.iterations = pivots;
  out.status = converged ? QRStatus::converged : QRStatus::max_iter;
  return out;
}

} // namespace elwqr
