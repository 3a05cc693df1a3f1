#include "banppa/evaluate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <vector>

#include "banppa/gtable.hpp"

namespace banppa {

namespace {

void check_aligned(const ModelState& state, const Dataset& data, const char* what) {
  if (!(data.window == state.window)) {
    throw std::invalid_argument(std::string(what) + ": window differs from the fitted window");
  }
  if (data.sequences.size() != state.sequence_ids.size()) {
    throw std::invalid_argument(std::string(what) + ": sequence count differs from the fit");
  }
  for (std::size_t d = 0; d < data.sequences.size(); ++d) {
    if (data.sequences[d].id != state.sequence_ids[d]) {
      throw std::invalid_argument(std::string(what) + ": sequence id mismatch at row " +
                                  std::to_string(d) + " (" + data.sequences[d].id + " vs " +
                                  state.sequence_ids[d] + ")");
    }
  }
}

// E[ln f_k(t)^2] for every component at every event of `data`, K x N with
// events ordered sequence-major. Factorizes the kernel once per component.
Eigen::MatrixXd expected_log_square_matrix(const ModelState& state, const Dataset& data) {
  const int k_num = state.components();
  Eigen::VectorXd times(data.total_events());
  Eigen::Index at = 0;
  for (const auto& seq : data.sequences) {
    for (double t : seq.events) times[at++] = t;
  }
  Eigen::MatrixXd elg(k_num, times.size());
  const GTable& table = default_gtable();
  for (int k = 0; k < k_num; ++k) {
    Eigen::VectorXd mean, var;
    predictive_moments(state.gps[k], state.kernels[k], state.pseudo, times, mean, var);
    for (Eigen::Index n = 0; n < times.size(); ++n) {
      elg(k, n) = expected_log_square(mean[n], var[n], table);
    }
  }
  return elg;
}

double log_sum_exp(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::exp(x[i] - m);
  return m + std::log(acc);
}

}  // namespace

double test_likelihood_point(const ModelState& state, const Dataset& test) {
  check_aligned(state, test, "evaluation data");
  const int k_num = state.components();
  const int d_num = state.rows();
  const Eigen::MatrixXd elg = expected_log_square_matrix(state, test);
  const Eigen::VectorXd volumes = component_volumes(state);

  double total = 0.0;
  Eigen::Index at = 0;
  for (int d = 0; d < d_num; ++d) {
    const Eigen::VectorXd weights = mean_weights(state, d);
    const double rate = state.has_sticks() ? state.rates.eta[d] : 1.0;
    const double log_rate = std::log(rate);
    Eigen::VectorXd log_w(k_num);
    for (int k = 0; k < k_num; ++k) log_w[k] = std::log(weights[k]);
    for (std::size_t n = 0; n < test.sequences[d].events.size(); ++n, ++at) {
      total += log_rate + log_sum_exp(log_w + elg.col(at));
    }
    total -= rate * weights.dot(volumes);
  }
  return total;
}

double test_likelihood_sampled(const ModelState& state, const Dataset& test, int samples,
                               Rng& rng, double* standard_error) {
  check_aligned(state, test, "evaluation data");
  if (!state.has_sticks()) {
    if (standard_error) *standard_error = 0.0;
    return test_likelihood_point(state, test);
  }
  if (samples < 1) throw std::invalid_argument("sampled likelihood needs at least 1 sample");

  const int k_num = state.components();
  const int d_num = state.rows();
  const Eigen::MatrixXd elg = expected_log_square_matrix(state, test);
  const Eigen::MatrixXd exp_elg = elg.array().exp().matrix();  // E[f^2] surrogate per event
  const Eigen::VectorXd volumes = component_volumes(state);

  std::gamma_distribution<double> rate_draw(state.hyper.a0, 1.0 / state.hyper.b0);
  std::vector<double> values(static_cast<std::size_t>(samples), 0.0);
  for (int l = 0; l < samples; ++l) {
    double value = 0.0;
    Eigen::Index at = 0;
    for (int d = 0; d < d_num; ++d) {
      const double s = rate_draw(rng);
      // Stick proportions from the fitted beta factors, weights by the same
      // telescoping scheme the means use, so they sum to one exactly.
      Eigen::VectorXd theta(k_num);
      double remainder = 1.0;
      for (int j = 0; j < k_num - 1; ++j) {
        std::gamma_distribution<double> g0(state.alloc.tau0(d, j), 1.0);
        std::gamma_distribution<double> g1(state.alloc.tau1(d, j), 1.0);
        const double a = g0(rng);
        const double b = g1(rng);
        const double prop = (a + b > 0.0) ? a / (a + b) : 0.5;
        theta[j] = remainder * prop;
        remainder -= theta[j];
      }
      theta[k_num - 1] = remainder;

      const double log_s = std::log(s);
      const std::size_t n_d = test.sequences[d].events.size();
      for (std::size_t n = 0; n < n_d; ++n, ++at) {
        value += log_s + std::log(theta.dot(exp_elg.col(at)));
      }
      value -= s * theta.dot(volumes);
    }
    values[static_cast<std::size_t>(l)] = value;
  }

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= samples;
  if (standard_error) {
    if (samples < 2) {
      *standard_error = 0.0;  // single draw, spread unknowable
    } else {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      *standard_error = std::sqrt(ss / (static_cast<double>(samples) * (samples - 1)));
    }
  }
  return mean;
}

Eigen::MatrixXd normalized_allocation(const ModelState& state) {
  const Eigen::ArrayXXd weights = expected_weights(state);
  const Eigen::VectorXd volumes = component_volumes(state);
  Eigen::MatrixXd out(weights.rows(), weights.cols());
  for (Eigen::Index d = 0; d < weights.rows(); ++d) {
    Eigen::ArrayXd row = weights.row(d).transpose() * volumes.array();
    const double total = row.sum();
    if (total > 0.0) {
      out.row(d) = (row / total).matrix().transpose();
    } else {
      std::fprintf(stderr, "banppa: allocation row %ld has no mass, using a uniform row\n",
                   static_cast<long>(d));
      out.row(d).setConstant(1.0 / static_cast<double>(weights.cols()));
    }
  }
  return out;
}

Eigen::VectorXd normalized_usage(const ModelState& state) {
  return normalized_allocation(state).colwise().mean();
}

Eigen::VectorXd raw_usage(const ModelState& state) {
  const Eigen::ArrayXXd weights = expected_weights(state);
  return weights.matrix().colwise().mean();
}

EvalReport build_report(const ModelState& state, const Dataset* train, const Dataset& test,
                        const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (opts.intensity_grid < 2) throw std::invalid_argument("intensity grid needs >= 2 points");
  if (!(opts.active_threshold >= 0.0)) {
    throw std::invalid_argument("active threshold must be nonnegative");
  }

  EvalReport report;
  report.samples = opts.samples;
  report.active_threshold = opts.active_threshold;
  report.test_likelihood_point = test_likelihood_point(state, test);
  Rng rng = make_rng(opts.seed);
  report.test_likelihood_sampled =
      test_likelihood_sampled(state, test, opts.samples, rng, &report.test_likelihood_se);
  if (train) {
    report.has_train = true;
    report.train_likelihood_point = test_likelihood_point(state, *train);
  }

  report.theta_hat = normalized_allocation(state);
  report.ner = report.theta_hat.colwise().mean();
  report.uner = raw_usage(state);
  report.volumes = component_volumes(state);
  report.active_components = 0;
  for (Eigen::Index k = 0; k < report.ner.size(); ++k) {
    if (report.ner[k] >= opts.active_threshold) ++report.active_components;
  }

  const int g = opts.intensity_grid;
  const int k_num = state.components();
  const int d_num = state.rows();
  report.grid.resize(g);
  const double step = state.window.length() / (g - 1);
  for (int i = 0; i < g; ++i) report.grid[i] = state.window.start + i * step;
  report.component_moment.resize(k_num, g);
  for (int k = 0; k < k_num; ++k) {
    Eigen::VectorXd mean, var;
    predictive_moments(state.gps[k], state.kernels[k], state.pseudo, report.grid, mean, var);
    report.component_moment.row(k) =
        (mean.array().square() + var.array()).matrix().transpose();
  }
  report.intensity.resize(d_num, g);
  for (int d = 0; d < d_num; ++d) {
    const Eigen::VectorXd weights = mean_weights(state, d);
    const double rate = state.has_sticks() ? state.rates.eta[d] : 1.0;
    report.intensity.row(d) = rate * (weights.transpose() * report.component_moment);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace banppa
