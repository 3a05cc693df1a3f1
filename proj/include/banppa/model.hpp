#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "banppa/gp.hpp"
#include "banppa/gtable.hpp"
#include "banppa/parallel.hpp"
#include "banppa/sequences.hpp"

namespace banppa {

// lppa:      point allocations, unit sequence rates, fixed component count.
// banppa_nc: stick-breaking allocations and per-sequence rates, no volume
//            constraint ("no constraint").
// banppa:    banppa_nc plus the augmented-Lagrangian volume constraint.
enum class Variant { lppa, banppa_nc, banppa };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

// Truncated stick-breaking posterior: independent Beta(tau0, tau1) factors
// for the first K-1 stick proportions, the last component takes whatever is
// left. Rows are sequences.
struct AllocationPosterior {
  Eigen::ArrayXXd tau0;  // D x (K-1), positive
  Eigen::ArrayXXd tau1;  // D x (K-1), positive

  int components() const { return static_cast<int>(tau0.cols()) + 1; }
  int rows() const { return static_cast<int>(tau0.rows()); }
};

struct RatePointEstimates {
  Eigen::VectorXd eta;  // per-sequence rate multiplier, positive
};

struct Hyperparams {
  double alpha = 1.0;      // stick concentration
  double a0 = 1.0;         // rate prior shape
  double b0 = 1.0;         // rate prior rate
  double prior_mean = 0.0; // GP prior mean level
};

struct ModelState {
  Variant variant = Variant::banppa;
  TimeWindow window;
  std::vector<std::string> sequence_ids;  // row order of the training data
  PseudoInputs pseudo;                    // shared across components
  std::vector<KernelParams> kernels;      // one per component
  std::vector<SparseGPPosterior> gps;     // one per component
  AllocationPosterior alloc;              // banppa / banppa_nc
  Eigen::ArrayXXd lppa_theta;             // D x K, lppa only
  RatePointEstimates rates;               // all ones for lppa
  Hyperparams hyper;

  int components() const;
  int rows() const { return static_cast<int>(sequence_ids.size()); }
  bool has_sticks() const { return variant != Variant::lppa; }
};

// E[theta_dk] for one sequence; sums to one exactly by telescoping.
Eigen::VectorXd stick_means(const AllocationPosterior& alloc, int d);

// E[ln theta'_dk] and E[ln(1 - theta'_dk)] for the K-1 beta factors.
void expected_log_sticks(const AllocationPosterior& alloc, int d,
                         Eigen::VectorXd& log_stick, Eigen::VectorXd& log_rest);

// Mean mixture weights: stick means for the nonparametric variants, the
// point allocation row for lppa.
Eigen::VectorXd mean_weights(const ModelState& state, int d);

// Augmented-Lagrangian bookkeeping for the per-component volume constraint
// E[integral of f_k^2] = target_volume.
struct AugLagMultipliers {
  Eigen::VectorXd w;           // linear multipliers
  Eigen::VectorXd v;           // quadratic penalty weights
  double target_volume = 0.0;

  static AugLagMultipliers initial(int k, double target_volume);
  static AugLagMultipliers zero(int k, double target_volume);
};

struct ElboTerms {
  double event = 0.0;       // collapsed log intensity summed over events
  double volume = 0.0;      // negated expected intensity mass
  double beta = 0.0;        // stick prior minus stick entropy
  double rate_prior = 0.0;  // gamma prior at the rate point estimates
  double gp_kl = 0.0;       // negated KL from the GP prior

  double total() const { return event + volume + beta + rate_prior + gp_kl; }
};

struct GpBlockGrad {
  Eigen::VectorXd mu;
  Eigen::MatrixXd chol;  // lower triangle populated, rest zero
  double lengthscale = 0.0;
};

struct ModelGradients {
  std::vector<GpBlockGrad> gp;  // one per component
  Eigen::ArrayXXd tau0;         // banppa / banppa_nc
  Eigen::ArrayXXd tau1;
  Eigen::ArrayXXd theta;        // lppa
};

struct Evaluation {
  double objective = 0.0;   // augmented objective; equals the bound when unpenalized
  ElboTerms terms;
  Eigen::VectorXd volumes;    // per-component expected squared-function mass
  Eigen::VectorXd residuals;  // volumes - target, only when multipliers are given
  ModelGradients grads;       // filled when requested
};

// Which gradient blocks the evaluator should produce. The block-coordinate
// optimizer asks for one block at a time; line-search probes ask for none.
struct GradRequest {
  bool gp = false;     // mu, chol, lengthscale per component
  bool alloc = false;  // tau (stick variants) or theta (lppa)

  bool any() const { return gp || alloc; }
  static GradRequest none() { return {}; }
  static GradRequest all() { return {true, true}; }
};

// Single pass over the data producing the objective, its pieces, the
// component volumes, and optionally the requested gradient blocks. Every
// higher-level entry point funnels through here; `exec` picks the kernel
// flavor, and both flavors produce bit-identical results.
Evaluation evaluate_model(const ModelState& state, const AugLagMultipliers* mult,
                          const Dataset& ds, const GTable& table, GradRequest req,
                          parallel::Exec exec = parallel::default_exec());

double elbo(const ModelState& state, const Dataset& ds);
ElboTerms test_elbo_terms(const ModelState& state, const Dataset& ds);

// Unnormalized per-component responsibilities of event n in sequence d.
Eigen::VectorXd compute_ldnk(const ModelState& state, const Dataset& ds, int d, int n);

// Volume constraint gap of component k. Only the constrained variant has a
// constraint to measure.
double constraint_residual(const ModelState& state, int k, double target_volume);

// Bound minus the augmented-Lagrangian penalty. For the unconstrained
// variants the penalty is identically zero and this equals elbo().
double augmented_objective(const ModelState& state, const AugLagMultipliers& mult,
                           const Dataset& ds);

ModelGradients grad_gp(const ModelState& state, const AugLagMultipliers* mult,
                       const Dataset& ds);
ModelGradients grad_tau(const ModelState& state, const Dataset& ds);

// Exact coordinate-ascent updates.
RatePointEstimates update_eta_closed_form(const ModelState& state, const Dataset& ds);
double update_alpha_closed_form(const ModelState& state);

// Expected allocation weights, one row per sequence (stick means or the
// point allocations, by variant).
Eigen::ArrayXXd expected_weights(const ModelState& state);

// Per-component volumes V_k = E[integral of f_k^2 over the window].
Eigen::VectorXd component_volumes(const ModelState& state);

inline constexpr double kEtaFloor = 1e-8;

}  // namespace banppa
