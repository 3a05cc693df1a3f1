#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "banppa/sequences.hpp"

namespace banppa {

// Squared-exponential kernel kappa(t, u) = gamma * exp(-(t-u)^2 / (2 a^2)).
struct KernelParams {
  double gamma = 1.0;        // signal variance
  double lengthscale = 1.0;  // a
  double jitter = 1e-6;      // initial diagonal jitter, relative to gamma
};

double kernel_eval(const KernelParams& p, double t, double u);

// Cross-kernel matrix. `add_jitter` is only meaningful for a square matrix
// over one set of points (X == Y) and adds jitter*gamma to the diagonal.
Eigen::MatrixXd kernel_matrix(const KernelParams& p, const Eigen::VectorXd& X,
                              const Eigen::VectorXd& Y, bool add_jitter = false);

// Shared pseudo-input locations, strictly inside the window.
struct PseudoInputs {
  Eigen::VectorXd locations;

  int count() const { return static_cast<int>(locations.size()); }
  static PseudoInputs equispaced(const TimeWindow& window, int m);
};

// Variational Gaussian over the function values at the pseudo inputs,
// parameterized by its mean and the lower Cholesky factor of its covariance.
struct SparseGPPosterior {
  Eigen::VectorXd mu;
  Eigen::MatrixXd chol;  // lower triangular, positive diagonal

  Eigen::MatrixXd sigma() const { return chol * chol.transpose(); }
};

// Cholesky of the jittered kernel matrix over the pseudo inputs. The jitter
// starts at p.jitter*gamma and doubles until the factorization succeeds;
// past 1e-2*gamma the matrix is declared numerically unusable. The jittered
// matrix is the working prior covariance everywhere downstream.
struct KernelCholesky {
  Eigen::MatrixXd kmm;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter_used = 0.0;
};

KernelCholesky kernel_cholesky(const KernelParams& p, const PseudoInputs& pseudo);

// Kernel cross-covariance integrated against itself over the window:
// Psi_ij = integral over the window of kappa(s, z_i) kappa(s, z_j) ds,
// in closed form via the Gaussian error function. Exactly symmetric.
Eigen::MatrixXd psi_matrix(const KernelParams& p, const PseudoInputs& pseudo,
                           const TimeWindow& window);
Eigen::MatrixXd psi_matrix_dlengthscale(const KernelParams& p, const PseudoInputs& pseudo,
                                        const TimeWindow& window);

// Predictive variances are floored here; keeps downstream logs finite when a
// query point sits numerically on top of a pseudo input.
inline constexpr double kVarianceFloor = 1e-12;

// Marginal predictive moments of the sparse posterior at the query points.
void predictive_moments(const SparseGPPosterior& post, const KernelParams& p,
                        const PseudoInputs& pseudo, const Eigen::VectorXd& query,
                        Eigen::VectorXd& mean, Eigen::VectorXd& var);

// integral over the window of E[f(s)^2] ds, in closed form through Psi.
double expected_integral_square(const SparseGPPosterior& post, const KernelParams& p,
                                const PseudoInputs& pseudo, const TimeWindow& window);

// Negated KL divergence from the prior N(prior_mean * 1, K_MM) to the
// posterior: this is the term added to the objective, zero when the
// posterior equals the prior and negative otherwise.
double gp_kl_term(const SparseGPPosterior& post, const KernelParams& p,
                  const PseudoInputs& pseudo, double prior_mean);

}  // namespace banppa
