#include "elwqr/missingness.hpp"

#include <cmath>
#include <stdexcept>

namespace elwqr {

namespace {

constexpr double kPiClamp = 1e-15;
constexpr double kGammaBound = 30.0; // separation guard
constexpr double kScoreTol = 1e-8;
constexpr int kMaxIter = 100;

double sigmoid_clamped(double t) {
  double p;
  if (t >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-t));
  } else {
    const double e = std::exp(t);
    p = e / (1.0 + e);
  }
  if (p < kPiClamp) p = kPiClamp;
  if (p > 1.0 - kPiClamp) p = 1.0 - kPiClamp;
  return p;
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double loglik_on(const Eigen::MatrixXd& H, const std::vector<int>& d,
                 const Eigen::VectorXd& gamma) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    const double t = H.row(i).dot(gamma);
    // delta*log(pi) + (1-delta)*log(1-pi) in stable form
    ll += d[static_cast<size_t>(i)] ? -softplus(-t) : -softplus(t);
  }
  return ll;
}

} // namespace

const char* to_string(MleStatus s) {
  switch (s) {
    case MleStatus::converged: return "converged";
    case MleStatus::separated: return "separated";
    case MleStatus::max_iter: return "max_iter";
  }
  return "?";
}

double pi_logistic(double y, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& gamma) {
  if (gamma.size() != 2 + z.size())
    throw std::invalid_argument("pi_logistic: gamma must have length 2 + dim(z)");
  double t = gamma[0] + y * gamma[1];
  for (Eigen::Index j = 0; j < z.size(); ++j) t += z[j] * gamma[2 + j];
  return sigmoid_clamped(t);
}

double binomial_loglik(const Dataset& data, const Eigen::VectorXd& gamma) {
  if (data.n() < 1) throw std::invalid_argument("binomial_loglik: empty dataset");
  if (gamma.size() != 2 + data.dim_z)
    throw std::invalid_argument("binomial_loglik: gamma dimension mismatch");
  double ll = 0.0;
  for (const auto& row : data.rows) {
    double t = gamma[0] + row.y * gamma[1];
    for (Eigen::Index j = 0; j < row.z.size(); ++j) t += row.z[j] * gamma[2 + j];
    ll += row.delta ? -softplus(-t) : -softplus(t);
  }
  return ll;
}

Eigen::VectorXd score_ub(int delta, double y, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& gamma) {
  const double pi = pi_logistic(y, z, gamma);
  Eigen::VectorXd h(gamma.size());
  h[0] = 1.0;
  h[1] = y;
  h.segment(2, z.size()) = z;
  return (static_cast<double>(delta) - pi) * h;
}

MleFit fit_logistic_mle(const Eigen::MatrixXd& H, const std::vector<int>& response) {
  const Eigen::Index n = H.rows();
  const Eigen::Index q = H.cols();
  if (static_cast<Eigen::Index>(response.size()) != n)
    throw std::invalid_argument("fit_logistic_mle: response length mismatch");
  if (n < q) throw std::invalid_argument("fit_logistic_mle: fewer rows than parameters");
  if (!H.allFinite())
    throw std::invalid_argument("fit_logistic_mle: non-finite design");
  int ones = 0;
  for (int d : response) {
    if (d != 0 && d != 1)
      throw std::invalid_argument("fit_logistic_mle: response must be 0/1");
    ones += d;
  }
  if (ones == 0 || ones == n)
    throw std::invalid_argument("fit_logistic_mle: needs both response classes");

  MleFit fit;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(q);
  double ll = loglik_on(H, response, gamma);
  Eigen::VectorXd pi(n), score(q);

  for (int iter = 0; iter <= kMaxIter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i)
      pi[i] = sigmoid_clamped(H.row(i).dot(gamma));
    score.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      score.noalias() +=
          (static_cast<double>(response[static_cast<size_t>(i)]) - pi[i]) *
          H.row(i).transpose();

    fit.gamma = gamma;
    fit.loglik = ll;
    fit.score_norm = score.lpNorm<Eigen::Infinity>();
    fit.iterations = iter;
    fit.min_pi = pi.minCoeff();
    if (fit.score_norm < kScoreTol) {
      // A vanishing score with clamped probabilities is saturation, not a
      // stationary point: the likelihood of separated data plateaus once
      // the fitted probabilities flatline at the clamp.
      const bool saturated =
          pi.minCoeff() <= 1.5 * kPiClamp || pi.maxCoeff() >= 1.0 - 1.5 * kPiClamp;
      fit.status = saturated ? MleStatus::separated : MleStatus::converged;
      return fit;
    }
    if (iter == kMaxIter) break;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index i = 0; i < n; ++i)
      hess.noalias() += (pi[i] * (1.0 - pi[i])) * H.row(i).transpose() * H.row(i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
    const double emax = es.eigenvalues().maxCoeff();
    const double emin = es.eigenvalues().minCoeff();
    if (!(emax > 0.0) || emin <= 1e-12 * emax) {
      fit.status = MleStatus::separated; // numerically singular information
      return fit;
    }
    Eigen::VectorXd step = es.eigenvectors() *
                           (es.eigenvectors().transpose() * score).cwiseQuotient(
                               es.eigenvalues());

    auto score_at = [&](const Eigen::VectorXd& g) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(q);
      for (Eigen::Index i = 0; i < n; ++i)
        s.noalias() += (static_cast<double>(response[static_cast<size_t>(i)]) -
                        sigmoid_clamped(H.row(i).dot(g))) *
                       H.row(i).transpose();
      return s;
    };

    bool accepted = false;
    // Once the predicted Newton gain drops below the floating-point noise of
    // the summed log-likelihood, objective comparisons can no longer see
    // genuine progress; switch to accepting the full step on score decrease.
    const double predicted_gain = 0.5 * score.dot(step);
    if (predicted_gain < 1e-12 * (1.0 + std::fabs(ll))) {
      Eigen::VectorXd cand = gamma + step;
      if (score_at(cand).lpNorm<Eigen::Infinity>() < fit.score_norm) {
        gamma = cand;
        ll = loglik_on(H, response, cand);
        accepted = true;
      }
    }
    if (!accepted) {
      double t = 1.0;
      for (int h = 0; h < 30; ++h) {
        Eigen::VectorXd cand = gamma + t * step;
        const double cand_ll = loglik_on(H, response, cand);
        if (cand_ll >= ll) {
          gamma = cand;
          ll = cand_ll;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
    }
    if (!accepted) break; // no ascent left; report best point below
    if (gamma.lpNorm<Eigen::Infinity>() > kGammaBound) {
      fit.gamma = gamma;
      fit.status = MleStatus::separated;
      return fit;
    }
  }
  fit.status = MleStatus::max_iter;
  return fit;
}

Eigen::MatrixXd missingness_basis(const Dataset& data) {
  Eigen::MatrixXd H(data.n(), 2 + data.dim_z);
  for (int i = 0; i < data.n(); ++i) H.row(i) = data.yz_basis(i).transpose();
  return H;
}

MleFit fit_gamma_mle(const Dataset& data) {
  data.validate();
  std::vector<int> d(static_cast<size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) d[static_cast<size_t>(i)] = data.rows[static_cast<size_t>(i)].delta ? 1 : 0;
  return fit_logistic_mle(missingness_basis(data), d);
}

Eigen::VectorXd fitted_pi(const Dataset& data, const Eigen::VectorXd& gamma) {
  Eigen::VectorXd pi(data.n());
  for (int i = 0; i < data.n(); ++i) {
    const Observation& row = data.rows[static_cast<size_t>(i)];
    pi[i] = pi_logistic(row.y, row.z, gamma);
  }
  return pi;
}

} // namespace elwqr
