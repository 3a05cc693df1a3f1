#include "banppa/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

#include "banppa/errors.hpp"
#include "banppa/gtable.hpp"
#include "banppa/io_util.hpp"
#include "banppa/rng.hpp"

namespace banppa {

namespace {

// Flat view of the GP block: per component the posterior mean, the lower
// triangle of the Cholesky factor (row-major), then the lengthscale when it
// is being learned.
struct GpBlock {
  int K;
  int M;
  bool learn_a;

  int per_component() const { return M + M * (M + 1) / 2 + (learn_a ? 1 : 0); }
  int dim() const { return K * per_component(); }

  Eigen::VectorXd pack(const ModelState& st) const {
    Eigen::VectorXd x(dim());
    int idx = 0;
    for (int k = 0; k < K; ++k) {
      const auto& gp = st.gps[static_cast<std::size_t>(k)];
      for (int i = 0; i < M; ++i) x[idx++] = gp.mu[i];
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j <= i; ++j) x[idx++] = gp.chol(i, j);
      }
      if (learn_a) x[idx++] = st.kernels[static_cast<std::size_t>(k)].lengthscale;
    }
    return x;
  }

  void unpack(const Eigen::VectorXd& x, ModelState& st) const {
    int idx = 0;
    for (int k = 0; k < K; ++k) {
      auto& gp = st.gps[static_cast<std::size_t>(k)];
      for (int i = 0; i < M; ++i) gp.mu[i] = x[idx++];
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j <= i; ++j) gp.chol(i, j) = x[idx++];
      }
      if (learn_a) st.kernels[static_cast<std::size_t>(k)].lengthscale = x[idx++];
    }
  }

  Eigen::VectorXd pack_grad(const ModelGradients& g) const {
    Eigen::VectorXd x(dim());
    int idx = 0;
    for (int k = 0; k < K; ++k) {
      const auto& b = g.gp[static_cast<std::size_t>(k)];
      for (int i = 0; i < M; ++i) x[idx++] = b.mu[i];
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j <= i; ++j) x[idx++] = b.chol(i, j);
      }
      if (learn_a) x[idx++] = b.lengthscale;
    }
    return x;
  }

  std::vector<bool> constrained() const {
    std::vector<bool> c(static_cast<std::size_t>(dim()), false);
    std::size_t idx = 0;
    for (int k = 0; k < K; ++k) {
      idx += static_cast<std::size_t>(M);
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j <= i; ++j) {
          if (i == j) c[idx] = true;  // Cholesky diagonal stays positive
          ++idx;
        }
      }
      if (learn_a) c[idx++] = true;
    }
    return c;
  }
};

// Flat view of the allocation block: beta parameters for the stick variants
// (d-major, tau0 then tau1 per factor), point allocations for lppa.
struct AllocBlock {
  bool sticks;
  int D;
  int K;

  int dim() const { return sticks ? D * (K - 1) * 2 : D * K; }

  Eigen::VectorXd pack(const ModelState& st) const {
    Eigen::VectorXd x(dim());
    int idx = 0;
    if (sticks) {
      for (int d = 0; d < D; ++d) {
        for (int j = 0; j < K - 1; ++j) {
          x[idx++] = st.alloc.tau0(d, j);
          x[idx++] = st.alloc.tau1(d, j);
        }
      }
    } else {
      for (int d = 0; d < D; ++d) {
        for (int k = 0; k < K; ++k) x[idx++] = st.lppa_theta(d, k);
      }
    }
    return x;
  }

  void unpack(const Eigen::VectorXd& x, ModelState& st) const {
    int idx = 0;
    if (sticks) {
      for (int d = 0; d < D; ++d) {
        for (int j = 0; j < K - 1; ++j) {
          st.alloc.tau0(d, j) = x[idx++];
          st.alloc.tau1(d, j) = x[idx++];
        }
      }
    } else {
      for (int d = 0; d < D; ++d) {
        for (int k = 0; k < K; ++k) st.lppa_theta(d, k) = x[idx++];
      }
    }
  }

  Eigen::VectorXd pack_grad(const ModelGradients& g) const {
    Eigen::VectorXd x(dim());
    int idx = 0;
    if (sticks) {
      for (int d = 0; d < D; ++d) {
        for (int j = 0; j < K - 1; ++j) {
          x[idx++] = g.tau0(d, j);
          x[idx++] = g.tau1(d, j);
        }
      }
    } else {
      for (int d = 0; d < D; ++d) {
        for (int k = 0; k < K; ++k) x[idx++] = g.theta(d, k);
      }
    }
    return x;
  }

  std::vector<bool> constrained() const {
    return std::vector<bool>(static_cast<std::size_t>(dim()), true);
  }
};

struct BlockOutcome {
  double objective = 0.0;
  long accepted = 0;
  bool degraded = false;
};

// Projected L-BFGS ascent with Armijo backtracking along the projected path.
// Internally minimizes the negated objective with textbook two-loop updates;
// curvature pairs that fail the positivity check are dropped.
BlockOutcome lbfgs_maximize(Eigen::VectorXd& x,
                            const std::function<double(const Eigen::VectorXd&)>& value_at,
                            const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>&
                                value_and_grad_at,
                            const std::vector<bool>& constrained, double floor, int memory,
                            int max_iters, double rel_tol) {
  auto project = [&](const Eigen::VectorXd& v) { return project_positive(v, floor, constrained); };
  x = project(x);

  Eigen::VectorXd grad(x.size());
  double fm = -value_and_grad_at(x, grad);
  Eigen::VectorXd gm = -grad;

  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho;
  BlockOutcome out;
  out.objective = -fm;

  auto projected_gradient_norm = [&]() {
    return (x - project(x - gm)).lpNorm<Eigen::Infinity>();
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    if (projected_gradient_norm() <= 1e-11 * (1.0 + std::abs(fm))) break;

    Eigen::VectorXd d = -gm;
    const int h = static_cast<int>(s_hist.size());
    if (h > 0) {
      Eigen::VectorXd q = gm;
      std::vector<double> alpha(static_cast<std::size_t>(h));
      for (int i = h - 1; i >= 0; --i) {
        auto iu = static_cast<std::size_t>(i);
        alpha[iu] = rho[iu] * s_hist[iu].dot(q);
        q -= alpha[iu] * y_hist[iu];
      }
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (int i = 0; i < h; ++i) {
        auto iu = static_cast<std::size_t>(i);
        double beta = rho[iu] * y_hist[iu].dot(q);
        q += (alpha[iu] - beta) * s_hist[iu];
      }
      d = -q;
    }
    if (gm.dot(d) >= 0.0) {
      s_hist.clear();
      y_hist.clear();
      rho.clear();
      d = -gm;
    }

    double t = 1.0;
    bool stepped = false;
    Eigen::VectorXd xc;
    for (int ls = 0; ls < 60; ++ls) {
      xc = project(x + t * d);
      Eigen::VectorXd step = xc - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      double along = gm.dot(step);
      if (along >= 0.0) {
        t *= 0.5;  // the projection bent the step uphill; shorten it
        continue;
      }
      double fmc = -value_at(xc);
      if (fmc <= fm + 1e-4 * along) {
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) {
      if (projected_gradient_norm() > 1e-6 * (1.0 + std::abs(fm))) out.degraded = true;
      break;
    }

    double fc = value_and_grad_at(xc, grad);
    Eigen::VectorXd gmc = -grad;
    double fmc = -fc;
    Eigen::VectorXd s = xc - x;
    Eigen::VectorXd yv = gmc - gm;
    double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho.erase(rho.begin());
      }
    }
    double improve = fm - fmc;
    x = std::move(xc);
    gm = std::move(gmc);
    fm = fmc;
    ++out.accepted;
    if (improve <= rel_tol * std::max(1.0, std::abs(fm))) break;
  }

  out.objective = -fm;
  return out;
}

}  // namespace

std::string FitConfig::canonical() const {
  std::ostringstream os;
  os << "fit-config-v1"
     << "|variant=" << variant_name(variant) << "|components=" << components
     << "|pseudo=" << pseudo_count << "|seed=" << seed
     << "|inner_tol=" << to_exact_string(inner_tol) << "|outer_tol=" << to_exact_string(outer_tol)
     << "|max_outer=" << max_outer << "|max_sweeps=" << max_sweeps
     << "|max_block_iters=" << max_block_iters << "|lbfgs_memory=" << lbfgs_memory
     << "|floor=" << to_exact_string(positivity_floor) << "|learn_alpha=" << learn_alpha
     << "|alpha0=" << to_exact_string(alpha0) << "|gamma_scale=" << to_exact_string(gamma_scale)
     << "|lengthscale0=" << to_exact_string(lengthscale0)
     << "|learn_lengthscale=" << learn_lengthscale
     << "|multiplier_growth=" << to_exact_string(multiplier_growth)
     << "|multiplier_clip=" << to_exact_string(multiplier_clip);
  return os.str();
}

std::uint64_t FitConfig::hash() const { return fnv1a(canonical()); }

Eigen::VectorXd project_positive(const Eigen::VectorXd& values, double floor,
                                 const std::vector<bool>& constrained) {
  if (constrained.size() != static_cast<std::size_t>(values.size())) {
    throw std::invalid_argument("project_positive: mask size mismatch");
  }
  Eigen::VectorXd out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (constrained[static_cast<std::size_t>(i)] && out[i] < floor) out[i] = floor;
  }
  return out;
}

Eigen::VectorXd project_positive(const Eigen::VectorXd& values, double floor) {
  return values.cwiseMax(floor);
}

ModelState initialize_state(const Dataset& train, const FitConfig& cfg) {
  if (train.size() == 0) throw DataError("initialize_state: no sequences to fit");
  if (train.total_events() == 0) throw DataError("initialize_state: no events to fit");
  if (cfg.components < 1 || cfg.pseudo_count < 1) {
    throw std::invalid_argument("initialize_state: components and pseudo inputs must be >= 1");
  }
  if (!(cfg.inner_tol > 0.0) || !(cfg.outer_tol > 0.0) || !(cfg.positivity_floor > 0.0)) {
    throw std::invalid_argument("initialize_state: tolerances and floor must be positive");
  }
  if (cfg.variant != Variant::lppa && !(cfg.alpha0 > 0.0)) {
    throw std::invalid_argument("initialize_state: concentration must be positive");
  }
  if (!(cfg.gamma_scale > 0.0)) {
    throw std::invalid_argument("initialize_state: gamma_scale must be positive");
  }

  const int D = static_cast<int>(train.size());
  const int K = cfg.components;
  const int M = cfg.pseudo_count;
  const double total = static_cast<double>(train.total_events());
  const double target = total / static_cast<double>(D);  // mean event mass per sequence
  const double len = train.window.length();

  ModelState st;
  st.variant = cfg.variant;
  st.window = train.window;
  st.sequence_ids.reserve(train.size());
  for (const auto& s : train.sequences) st.sequence_ids.push_back(s.id);
  st.pseudo = PseudoInputs::equispaced(train.window, M);

  const double gamma = cfg.gamma_scale * target / len;
  const double ls0 = cfg.lengthscale0 > 0.0 ? cfg.lengthscale0
                                            : len / static_cast<double>(std::max(K, 10));
  st.kernels.assign(static_cast<std::size_t>(K), KernelParams{gamma, ls0, 1e-6});

  KernelCholesky kc = kernel_cholesky(st.kernels[0], st.pseudo);
  Eigen::MatrixXd chol0 = kc.llt.matrixL();
  const double g = std::sqrt(target / len);
  st.hyper.prior_mean = g;
  st.gps.resize(static_cast<std::size_t>(K));
  for (auto& gp : st.gps) {
    gp.mu = Eigen::VectorXd::Constant(M, g);
    gp.chol = chol0;
  }

  Rng rng = make_rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  st.hyper.alpha = cfg.alpha0;
  if (st.has_sticks()) {
    st.alloc.tau0.resize(D, K - 1);
    st.alloc.tau1.resize(D, K - 1);
    // Random allocation rows: each sequence starts at its own uniform simplex
    // draw, folded into the stick means with a soft pseudo-count so the first
    // sweeps can reshape them. Starting every sequence on the prior's ordered
    // decay lets the leading components swallow the corpus before the curves
    // have differentiated, and the spare components never recover.
    std::gamma_distribution<double> unit_gamma(1.0, 1.0);
    constexpr double kSoftCount = 2.0;
    Eigen::VectorXd w(K);
    for (int d = 0; d < D; ++d) {
      double total_w = 0.0;
      for (int k = 0; k < K; ++k) {
        w[k] = unit_gamma(rng);
        total_w += w[k];
      }
      if (!(total_w > 0.0)) {
        w.setConstant(1.0);
        total_w = static_cast<double>(K);
      }
      w /= total_w;
      double remainder = 1.0;
      for (int j = 0; j < K - 1; ++j) {
        const double want = remainder > 1e-12 ? w[j] / remainder : 0.5;
        const double v = std::clamp(want, 0.02, 0.98);
        st.alloc.tau0(d, j) = kSoftCount * v;
        st.alloc.tau1(d, j) = kSoftCount * (1.0 - v);
        remainder -= w[j];
      }
    }
  } else {
    st.lppa_theta.resize(D, K);
    for (int d = 0; d < D; ++d) {
      for (int k = 0; k < K; ++k) {
        st.lppa_theta(d, k) = std::max(unit(rng), cfg.positivity_floor);
      }
    }
  }

  // Moment-match the rate prior to the per-sequence counts. With volumes
  // pinned near N/D the implied rates sit near 1, so the prior mean is 1 and
  // the shape comes from the excess (over-Poisson) variance of the counts;
  // counts with no excess spread get a tight prior, capped at shape 100.
  double shape = 1.0;
  if (D > 1) {
    double mean = total / static_cast<double>(D);
    double ss = 0.0;
    for (const auto& s : train.sequences) {
      double c = static_cast<double>(s.count()) - mean;
      ss += c * c;
    }
    const double var = ss / static_cast<double>(D - 1);
    const double excess = var - mean;
    shape = excess > 0.0 ? std::clamp(mean * mean / excess, 1.0, 100.0) : 100.0;
  }
  st.hyper.a0 = shape;
  st.hyper.b0 = shape;

  st.rates.eta = Eigen::VectorXd::Ones(D);
  if (st.has_sticks()) st.rates = update_eta_closed_form(st, train);
  return st;
}

InnerResult inner_solve(ModelState& state, const AugLagMultipliers* mult, const Dataset& ds,
                        const FitConfig& cfg) {
  const GTable& table = default_gtable();
  const auto exec = parallel::default_exec();
  const GpBlock gb{state.components(), state.pseudo.count(), cfg.learn_lengthscale};
  const AllocBlock ab{state.has_sticks(), state.rows(), state.components()};

  auto objective_only = [&]() {
    return evaluate_model(state, mult, ds, table, GradRequest::none(), exec).objective;
  };

  InnerResult res;
  double prev = objective_only();
  res.objective_trace.push_back(prev);

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    {
      Eigen::VectorXd x = gb.pack(state);
      auto value = [&](const Eigen::VectorXd& xv) {
        gb.unpack(xv, state);
        return evaluate_model(state, mult, ds, table, GradRequest::none(), exec).objective;
      };
      auto value_grad = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& g) {
        gb.unpack(xv, state);
        Evaluation ev = evaluate_model(state, mult, ds, table, GradRequest{true, false}, exec);
        g = gb.pack_grad(ev.grads);
        return ev.objective;
      };
      BlockOutcome oc = lbfgs_maximize(x, value, value_grad, gb.constrained(),
                                       cfg.positivity_floor, cfg.lbfgs_memory,
                                       cfg.max_block_iters, 0.1 * cfg.inner_tol);
      gb.unpack(x, state);
      res.accepted_steps += oc.accepted;
      res.degraded = res.degraded || oc.degraded;
    }
    {
      Eigen::VectorXd x = ab.pack(state);
      auto value = [&](const Eigen::VectorXd& xv) {
        ab.unpack(xv, state);
        return evaluate_model(state, mult, ds, table, GradRequest::none(), exec).objective;
      };
      auto value_grad = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& g) {
        ab.unpack(xv, state);
        Evaluation ev = evaluate_model(state, mult, ds, table, GradRequest{false, true}, exec);
        g = ab.pack_grad(ev.grads);
        return ev.objective;
      };
      BlockOutcome oc = lbfgs_maximize(x, value, value_grad, ab.constrained(),
                                       cfg.positivity_floor, cfg.lbfgs_memory,
                                       cfg.max_block_iters, 0.1 * cfg.inner_tol);
      ab.unpack(x, state);
      res.accepted_steps += oc.accepted;
      res.degraded = res.degraded || oc.degraded;
    }
    if (state.has_sticks()) {
      state.rates = update_eta_closed_form(state, ds);
      if (cfg.learn_alpha && state.components() >= 2) {
        state.hyper.alpha = update_alpha_closed_form(state);
      }
    }

    double obj = objective_only();
    res.objective_trace.push_back(obj);
    ++res.sweeps;
    bool done = std::abs(obj - prev) <= cfg.inner_tol * std::max(1.0, std::abs(prev));
    prev = obj;
    if (done) {
      res.converged = true;
      break;
    }
  }
  return res;
}

FitResult outer_loop(const Dataset& train, const FitConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();

  FitResult fit;
  fit.config = cfg;
  fit.state = initialize_state(train, cfg);
  fit.target_volume =
      static_cast<double>(train.total_events()) / static_cast<double>(train.size());

  if (cfg.variant != Variant::banppa) {
    InnerResult ir = inner_solve(fit.state, nullptr, train, cfg);
    fit.objective_trace = ir.objective_trace;
    fit.accepted_steps = ir.accepted_steps;
    fit.degraded = ir.degraded;
    fit.outer_iterations = 1;
    fit.termination = ir.converged ? "converged" : "max-iterations";
  } else {
    AugLagMultipliers mult =
        AugLagMultipliers::initial(cfg.components, fit.target_volume);
    double prev = std::numeric_limits<double>::quiet_NaN();
    fit.termination = "max-iterations";
    for (int it = 1; it <= cfg.max_outer; ++it) {
      InnerResult ir = inner_solve(fit.state, &mult, train, cfg);
      fit.objective_trace.insert(fit.objective_trace.end(), ir.objective_trace.begin(),
                                 ir.objective_trace.end());
      fit.accepted_steps += ir.accepted_steps;
      fit.degraded = fit.degraded || ir.degraded;

      Evaluation ev =
          evaluate_model(fit.state, &mult, train, default_gtable(), GradRequest::none());
      fit.outer_objective_trace.push_back(ev.objective);
      fit.residual_trace.push_back(ev.residuals);
      fit.outer_iterations = it;

      if (it > 1 && std::abs(ev.objective - prev) <=
                        cfg.outer_tol * std::max(1.0, std::abs(prev))) {
        fit.termination = "converged";
        break;
      }
      prev = ev.objective;

      for (int k = 0; k < cfg.components; ++k) {
        double w = mult.w[k] + mult.v[k] * ev.residuals[k];
        mult.w[k] = std::clamp(w, -cfg.multiplier_clip, cfg.multiplier_clip);
        mult.v[k] *= cfg.multiplier_growth;
      }
    }
  }

  fit.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return fit;
}

}  // namespace banppa
