#include "banppa/gp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "banppa/errors.hpp"

namespace banppa {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

void check_params(const KernelParams& p, const char* where) {
  if (!(p.gamma > 0.0) || !(p.lengthscale > 0.0)) {
    throw std::invalid_argument(std::string(where) + ": kernel parameters must be positive");
  }
}

}  // namespace

double kernel_eval(const KernelParams& p, double t, double u) {
  check_params(p, "kernel_eval");
  double d = t - u;
  return p.gamma * std::exp(-d * d / (2.0 * p.lengthscale * p.lengthscale));
}

Eigen::MatrixXd kernel_matrix(const KernelParams& p, const Eigen::VectorXd& X,
                              const Eigen::VectorXd& Y, bool add_jitter) {
  check_params(p, "kernel_matrix");
  if (add_jitter && (X.size() != Y.size() || X != Y)) {
    throw std::invalid_argument("kernel_matrix: jitter applies only to a square matrix over one point set");
  }
  const double inv2a2 = 1.0 / (2.0 * p.lengthscale * p.lengthscale);
  Eigen::MatrixXd K(X.size(), Y.size());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    for (Eigen::Index j = 0; j < Y.size(); ++j) {
      double d = X[i] - Y[j];
      K(i, j) = p.gamma * std::exp(-d * d * inv2a2);
    }
  }
  if (add_jitter) K.diagonal().array() += p.jitter * p.gamma;
  return K;
}

PseudoInputs PseudoInputs::equispaced(const TimeWindow& window, int m) {
  if (m < 1) throw std::invalid_argument("PseudoInputs::equispaced: need at least one location");
  if (!(window.start < window.end)) {
    throw std::invalid_argument("PseudoInputs::equispaced: degenerate window");
  }
  PseudoInputs pi;
  pi.locations.resize(m);
  double step = window.length() / static_cast<double>(m);
  for (int i = 0; i < m; ++i) {
    pi.locations[i] = window.start + (static_cast<double>(i) + 0.5) * step;
  }
  return pi;
}

KernelCholesky kernel_cholesky(const KernelParams& p, const PseudoInputs& pseudo) {
  check_params(p, "kernel_cholesky");
  if (pseudo.count() < 1) throw std::invalid_argument("kernel_cholesky: empty pseudo inputs");
  Eigen::MatrixXd base = kernel_matrix(p, pseudo.locations, pseudo.locations, false);
  double eps = p.jitter * p.gamma;
  const double ceiling = 1e-2 * p.gamma;
  while (true) {
    KernelCholesky out;
    out.kmm = base;
    out.kmm.diagonal().array() += eps;
    out.llt.compute(out.kmm);
    if (out.llt.info() == Eigen::Success) {
      out.jitter_used = eps;
      return out;
    }
    eps *= 2.0;
    if (eps > ceiling) {
      throw NumericalError("kernel_cholesky: matrix stays indefinite up to jitter 1e-2*gamma");
    }
  }
}

Eigen::MatrixXd psi_matrix(const KernelParams& p, const PseudoInputs& pseudo,
                           const TimeWindow& window) {
  check_params(p, "psi_matrix");
  const double a = p.lengthscale;
  const Eigen::VectorXd& z = pseudo.locations;
  const Eigen::Index m = z.size();
  Eigen::MatrixXd psi(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      double delta = z[i] - z[j];
      double mid = 0.5 * (z[i] + z[j]);
      double hi = (window.end - mid) / a;
      double lo = (window.start - mid) / a;
      double val = p.gamma * p.gamma * std::exp(-delta * delta / (4.0 * a * a)) *
                   (a * kSqrtPi / 2.0) * (std::erf(hi) - std::erf(lo));
      psi(i, j) = val;
      psi(j, i) = val;
    }
  }
  return psi;
}

Eigen::MatrixXd psi_matrix_dlengthscale(const KernelParams& p, const PseudoInputs& pseudo,
                                        const TimeWindow& window) {
  check_params(p, "psi_matrix_dlengthscale");
  const double a = p.lengthscale;
  const Eigen::VectorXd& z = pseudo.locations;
  const Eigen::Index m = z.size();
  Eigen::MatrixXd dpsi(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      double delta = z[i] - z[j];
      double mid = 0.5 * (z[i] + z[j]);
      double hi = (window.end - mid) / a;
      double lo = (window.start - mid) / a;
      double gauss = std::exp(-delta * delta / (4.0 * a * a));
      double erf_part = std::erf(hi) - std::erf(lo);
      // product rule over the Gaussian prefactor and the integrated column;
      // the erf arguments carry their own 1/a dependence.
      double val = p.gamma * p.gamma * gauss *
                   ((delta * delta / (2.0 * a * a * a)) * (a * kSqrtPi / 2.0) * erf_part +
                    (kSqrtPi / 2.0) * erf_part -
                    (hi * std::exp(-hi * hi) - lo * std::exp(-lo * lo)));
      dpsi(i, j) = val;
      dpsi(j, i) = val;
    }
  }
  return dpsi;
}

void predictive_moments(const SparseGPPosterior& post, const KernelParams& p,
                        const PseudoInputs& pseudo, const Eigen::VectorXd& query,
                        Eigen::VectorXd& mean, Eigen::VectorXd& var) {
  KernelCholesky kc = kernel_cholesky(p, pseudo);
  Eigen::VectorXd kinv_mu = kc.llt.solve(post.mu);
  mean.resize(query.size());
  var.resize(query.size());
  const double inv2a2 = 1.0 / (2.0 * p.lengthscale * p.lengthscale);
  Eigen::VectorXd kt(pseudo.count());
  for (Eigen::Index n = 0; n < query.size(); ++n) {
    for (Eigen::Index i = 0; i < kt.size(); ++i) {
      double d = query[n] - pseudo.locations[i];
      kt[i] = p.gamma * std::exp(-d * d * inv2a2);
    }
    Eigen::VectorXd b = kc.llt.solve(kt);
    Eigen::VectorXd sb = post.chol * (post.chol.transpose() * b);
    mean[n] = kt.dot(kinv_mu);
    var[n] = std::max(p.gamma - kt.dot(b) + b.dot(sb), kVarianceFloor);
  }
}

double expected_integral_square(const SparseGPPosterior& post, const KernelParams& p,
                                const PseudoInputs& pseudo, const TimeWindow& window) {
  KernelCholesky kc = kernel_cholesky(p, pseudo);
  Eigen::MatrixXd psi = psi_matrix(p, pseudo, window);
  Eigen::MatrixXd kinv_psi = kc.llt.solve(psi);
  Eigen::MatrixXd kinv_psi_kinv = kc.llt.solve(kinv_psi.transpose());
  Eigen::MatrixXd second = post.chol * post.chol.transpose();
  second.noalias() += post.mu * post.mu.transpose();
  return p.gamma * window.length() - kinv_psi.trace() +
         (kinv_psi_kinv.array() * second.array()).sum();
}

double gp_kl_term(const SparseGPPosterior& post, const KernelParams& p,
                  const PseudoInputs& pseudo, double prior_mean) {
  KernelCholesky kc = kernel_cholesky(p, pseudo);
  const Eigen::Index m = pseudo.count();
  if (post.mu.size() != m || post.chol.rows() != m || post.chol.cols() != m) {
    throw std::invalid_argument("gp_kl_term: posterior size does not match pseudo inputs");
  }
  double logdet_sigma = 2.0 * post.chol.diagonal().array().log().sum();
  double logdet_kmm =
      2.0 * kc.llt.matrixLLT().diagonal().array().log().sum();
  Eigen::MatrixXd kinv_sigma = kc.llt.solve(post.sigma());
  Eigen::VectorXd centered = post.mu.array() - prior_mean;
  double quad = centered.dot(kc.llt.solve(centered));
  return 0.5 * (logdet_sigma - logdet_kmm) + 0.5 * static_cast<double>(m) -
         0.5 * (kinv_sigma.trace() + quad);
}

}  // namespace banppa
