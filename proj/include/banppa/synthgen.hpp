#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "banppa/sequences.hpp"

namespace banppa {

// One mixture basis: a sum of Gaussian bumps exp(-(t-c)^2/10), normalized so
// the basis integrates to one over the window.
struct BasisSpec {
  std::vector<double> centers;
};

struct SynthSpec {
  std::string name;      // "A".."E" for the presets, free-form otherwise
  int sequences = 0;     // D
  TimeWindow window;
  std::vector<BasisSpec> bases;
  std::vector<double> dirichlet;  // one concentration per basis
  double rate_shape = 2.0;        // per-sequence rate s ~ Gamma(shape, rate)
  double rate_rate = 3.0;
  // Multiplier on the per-sequence rate. The presets calibrate it so the
  // expected corpus size matches the reference experiments (tens of events
  // per sequence); the bases themselves integrate to one, so the expected
  // event count of sequence d is intensity_scale * s_d.
  double intensity_scale = 1.0;
  std::uint64_t seed = 0;
  // Nonzero: the kernel width to freeze when fitting this corpus (the
  // narrow-bump presets are normally fit with the width held fixed).
  double recommended_lengthscale = 0.0;

  int basis_count() const { return static_cast<int>(bases.size()); }
  static SynthSpec preset(char which, std::uint64_t seed);
};

// Normalized basis value f_k(t).
double basis_eval(const SynthSpec& spec, int k, double t);

struct GroundTruth {
  Eigen::VectorXd s;      // per-sequence rates
  Eigen::MatrixXd theta;  // D x K simplex rows
};

// Draws rates and weights, then thins each sequence against a grid-maximized
// intensity bound. Deterministic given the seed; sequences get independent
// derived streams so generation parallelizes.
std::pair<Dataset, GroundTruth> generate(const SynthSpec& spec);

}  // namespace banppa
