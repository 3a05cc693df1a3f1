#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "banppa/model.hpp"
#include "banppa/sequences.hpp"

namespace banppa {

struct FitConfig {
  Variant variant = Variant::banppa;
  int components = 14;     // K
  int pseudo_count = 18;   // M
  std::uint64_t seed = 0;

  double inner_tol = 1e-3;  // relative bound change that ends a block sweep cycle
  double outer_tol = 1e-3;  // relative penalized-bound change that ends the outer loop
  int max_outer = 15;
  int max_sweeps = 60;
  int max_block_iters = 100;  // quasi-Newton iterations per block visit
  int lbfgs_memory = 10;

  double positivity_floor = 1e-6;  // lower bound for tau, theta, chol diagonals, lengthscales
  bool learn_alpha = true;
  double alpha0 = 1.0;             // initial concentration; fixed value when not learned
  double gamma_scale = 1.0;        // kernel variance = gamma_scale * mean event mass / window
  double lengthscale0 = 0.0;       // 0 picks window/max(components, 10)
  bool learn_lengthscale = true;

  double multiplier_growth = 4.0;
  double multiplier_clip = 1e6;

  // Stable text rendering of every field; its hash is embedded in artifacts.
  std::string canonical() const;
  std::uint64_t hash() const;
};

// Elementwise max(value, floor), applied only where `constrained` is set.
Eigen::VectorXd project_positive(const Eigen::VectorXd& values, double floor,
                                 const std::vector<bool>& constrained);
Eigen::VectorXd project_positive(const Eigen::VectorXd& values, double floor);

ModelState initialize_state(const Dataset& train, const FitConfig& cfg);

struct InnerResult {
  int sweeps = 0;
  long accepted_steps = 0;
  bool converged = false;  // the relative-change tolerance was met
  bool degraded = false;   // a line search failed away from stationarity
  std::vector<double> objective_trace;  // starting value, then one entry per sweep
};

// Block-coordinate ascent on the (possibly penalized) bound at fixed
// multipliers: projected quasi-Newton on the GP block, then on the
// allocation block, then the closed-form rate and concentration updates.
// The trace never decreases across accepted steps.
InnerResult inner_solve(ModelState& state, const AugLagMultipliers* mult, const Dataset& ds,
                        const FitConfig& cfg);

struct FitResult {
  ModelState state;
  FitConfig config;
  std::vector<double> objective_trace;          // concatenated inner traces
  std::vector<double> outer_objective_trace;    // penalized bound per outer iteration
  std::vector<Eigen::VectorXd> residual_trace;  // volume gaps per outer iteration
  double target_volume = 0.0;
  int outer_iterations = 0;
  long accepted_steps = 0;
  std::string termination;  // "converged" or "max-iterations"
  bool degraded = false;
  double wall_seconds = 0.0;  // runtime metadata, kept out of numeric artifacts
};

// Full fit: initialization, then the multiplier schedule for the constrained
// variant or a single inner solve for the others.
FitResult outer_loop(const Dataset& train, const FitConfig& cfg);

}  // namespace banppa
