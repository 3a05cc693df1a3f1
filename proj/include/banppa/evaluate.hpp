#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "banppa/model.hpp"
#include "banppa/rng.hpp"
#include "banppa/sequences.hpp"

namespace banppa {

// Plug-in log likelihood of held-out events: posterior mean weights and rate
// estimates, expected log-square moments per component. The test data must
// carry the same window and the same sequence ids, in order, as the fit.
double test_likelihood_point(const ModelState& state, const Dataset& test);

// Monte Carlo estimator drawing joint samples of the per-sequence rates
// (from their prior, the fitted point estimates carry no spread) and of the
// stick proportions (from the fitted posterior). For the point-allocation
// variant there is nothing to sample and the plug-in value is returned with
// zero standard error.
double test_likelihood_sampled(const ModelState& state, const Dataset& test, int samples,
                               Rng& rng, double* standard_error = nullptr);

// Volume-weighted allocation shares, one row per sequence. Rows sum to one.
Eigen::MatrixXd normalized_allocation(const ModelState& state);

// Column means of the volume-weighted shares: the effective share of events
// each component explains.
Eigen::VectorXd normalized_usage(const ModelState& state);

// Column means of the raw expected weights, ignoring component volumes.
Eigen::VectorXd raw_usage(const ModelState& state);

struct EvalOptions {
  int samples = 100;
  int intensity_grid = 200;
  double active_threshold = 0.01;
  std::uint64_t seed = 0;
};

struct EvalReport {
  bool has_train = false;
  double train_likelihood_point = 0.0;
  double test_likelihood_point = 0.0;
  double test_likelihood_sampled = 0.0;
  double test_likelihood_se = 0.0;
  int samples = 0;
  Eigen::VectorXd ner;         // normalized usage
  Eigen::VectorXd uner;        // raw usage
  Eigen::VectorXd volumes;
  Eigen::MatrixXd theta_hat;   // volume-weighted shares, D x K
  int active_components = 0;
  double active_threshold = 0.01;
  Eigen::VectorXd grid;                // intensity evaluation points
  Eigen::MatrixXd component_moment;    // K x G second moments of each component
  Eigen::MatrixXd intensity;           // D x G fitted intensity curves
  double wall_seconds = 0.0;           // runtime metadata, not a numeric artifact
};

EvalReport build_report(const ModelState& state, const Dataset* train, const Dataset& test,
                        const EvalOptions& opts);

}  // namespace banppa
