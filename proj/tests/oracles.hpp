#pragma once

// Shared reference implementations for the test suite: quadrature, dense
// linear-algebra formulas, finite differences, and randomized-but-valid
// model states. These deliberately avoid the library's own shortcut paths.

#include <functional>
#include <random>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "banppa/model.hpp"
#include "banppa/rng.hpp"
#include "banppa/sequences.hpp"

namespace oracles {

inline double quad(const std::function<double(double)>& f, double a, double b,
                   double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, tol);
}

inline double central_fd(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Dense textbook evaluation of the sparse posterior's marginal moments,
// using explicit inverses instead of factorizations.
inline void dense_predictive(const banppa::SparseGPPosterior& post,
                             const banppa::KernelParams& p, const banppa::PseudoInputs& pseudo,
                             double t, double jitter_used, double& mean, double& var) {
  const Eigen::Index m = pseudo.locations.size();
  Eigen::MatrixXd kmm = banppa::kernel_matrix(p, pseudo.locations, pseudo.locations);
  kmm.diagonal().array() += jitter_used;
  const Eigen::MatrixXd kinv = kmm.inverse();
  Eigen::VectorXd kt(m);
  for (Eigen::Index i = 0; i < m; ++i) kt[i] = banppa::kernel_eval(p, t, pseudo.locations[i]);
  const Eigen::MatrixXd sigma = post.chol * post.chol.transpose();
  mean = kt.dot(kinv * post.mu);
  var = p.gamma - kt.dot(kinv * kt) + kt.dot(kinv * sigma * kinv * kt);
}

// KL(q || prior) for two Gaussians, assembled from the generic formula.
inline double dense_gaussian_kl(const Eigen::VectorXd& mu_q, const Eigen::MatrixXd& sigma_q,
                                const Eigen::VectorXd& mu_p, const Eigen::MatrixXd& sigma_p) {
  const Eigen::Index m = mu_q.size();
  const Eigen::MatrixXd pinv = sigma_p.inverse();
  const Eigen::VectorXd diff = mu_q - mu_p;
  const double tr = (pinv * sigma_q).trace();
  const double quad_form = diff.dot(pinv * diff);
  const double logdet = std::log(sigma_p.determinant()) - std::log(sigma_q.determinant());
  return 0.5 * (tr + quad_form - static_cast<double>(m) + logdet);
}

inline banppa::Dataset random_dataset(int d_num, banppa::TimeWindow window, int max_events,
                                      std::uint64_t seed) {
  banppa::Rng rng = banppa::make_rng(seed);
  std::uniform_int_distribution<int> count(0, max_events);
  std::uniform_real_distribution<double> spot(window.start + 1e-6 * window.length(),
                                              window.end - 1e-6 * window.length());
  banppa::Dataset ds;
  ds.window = window;
  for (int d = 0; d < d_num; ++d) {
    banppa::TimeSequence seq;
    seq.id = "seq-" + std::to_string(d);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) seq.events.push_back(spot(rng));
    std::sort(seq.events.begin(), seq.events.end());
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

// A valid, deliberately non-stationary state: posterior away from the prior,
// uneven allocations, uneven rates.
inline banppa::ModelState random_state(banppa::Variant variant, int d_num, int k_num, int m_num,
                                       banppa::TimeWindow window, std::uint64_t seed) {
  using namespace banppa;
  Rng rng = make_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ModelState st;
  st.variant = variant;
  st.window = window;
  for (int d = 0; d < d_num; ++d) st.sequence_ids.push_back("seq-" + std::to_string(d));
  st.pseudo = PseudoInputs::equispaced(window, m_num);
  for (int k = 0; k < k_num; ++k) {
    KernelParams p;
    p.gamma = 0.5 + unit(rng);
    p.lengthscale = window.length() * (0.08 + 0.1 * unit(rng));
    st.kernels.push_back(p);
  }
  for (int k = 0; k < k_num; ++k) {
    KernelCholesky kc = kernel_cholesky(st.kernels[k], st.pseudo);
    SparseGPPosterior gp;
    gp.mu.resize(m_num);
    for (int i = 0; i < m_num; ++i) gp.mu[i] = 0.2 + 0.8 * unit(rng);
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(m_num, m_num);
    for (int i = 0; i < m_num; ++i) {
      for (int j = 0; j < i; ++j) lower(i, j) = 0.05 * (unit(rng) - 0.5);
      lower(i, i) = 0.1 + 0.3 * unit(rng);
    }
    // Blend toward the prior factor so covariances stay well scaled.
    gp.chol = 0.5 * Eigen::MatrixXd(kc.llt.matrixL()) + lower;
    st.gps.push_back(std::move(gp));
  }
  if (variant == Variant::lppa) {
    st.lppa_theta.resize(d_num, k_num);
    for (int d = 0; d < d_num; ++d) {
      for (int k = 0; k < k_num; ++k) st.lppa_theta(d, k) = 0.05 + unit(rng);
    }
    st.rates.eta = Eigen::VectorXd::Ones(d_num);
  } else {
    st.alloc.tau0.resize(d_num, k_num - 1);
    st.alloc.tau1.resize(d_num, k_num - 1);
    for (int d = 0; d < d_num; ++d) {
      for (int j = 0; j < k_num - 1; ++j) {
        st.alloc.tau0(d, j) = 0.5 + 2.0 * unit(rng);
        st.alloc.tau1(d, j) = 0.5 + 2.0 * unit(rng);
      }
    }
    st.rates.eta.resize(d_num);
    for (int d = 0; d < d_num; ++d) st.rates.eta[d] = 0.3 + unit(rng);
  }
  st.hyper.alpha = 0.8 + unit(rng);
  st.hyper.a0 = 1.2 + unit(rng);
  st.hyper.b0 = 0.8 + unit(rng);
  st.hyper.prior_mean = 0.4 + 0.2 * unit(rng);
  return st;
}

}  // namespace oracles
