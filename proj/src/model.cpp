#include "banppa/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "banppa/errors.hpp"

namespace banppa {

namespace {

using boost::math::digamma;
using boost::math::trigamma;

struct FlatEvents {
  std::vector<double> times;        // sequence-major
  std::vector<std::size_t> offset;  // D+1 entries
};

FlatEvents flatten(const Dataset& ds) {
  FlatEvents fe;
  fe.offset.resize(ds.size() + 1, 0);
  for (std::size_t d = 0; d < ds.size(); ++d) {
    fe.offset[d + 1] = fe.offset[d] + ds.sequences[d].count();
  }
  fe.times.resize(fe.offset.back());
  for (std::size_t d = 0; d < ds.size(); ++d) {
    std::copy(ds.sequences[d].events.begin(), ds.sequences[d].events.end(),
              fe.times.begin() + static_cast<std::ptrdiff_t>(fe.offset[d]));
  }
  return fe;
}

// Geometry of one component that every term and gradient block reuses.
struct ComponentCtx {
  KernelCholesky kc;
  Eigen::MatrixXd sigma;          // L L^T
  Eigen::VectorXd kinv_mu;        // K^{-1} mu
  Eigen::VectorXd centered;       // mu - prior_mean
  Eigen::MatrixXd psi;
  Eigen::MatrixXd kinv_psi;       // K^{-1} Psi
  Eigen::MatrixXd kinv_psi_kinv;  // K^{-1} Psi K^{-1}; doubles as dV/dSigma
  double volume = 0.0;
  double kl = 0.0;
  // filled only when gradients are requested
  Eigen::MatrixXd dkmm;           // dK/da; the jitter offset is constant in a
  Eigen::MatrixXd dpsi;
  Eigen::VectorXd dkmm_kinv_mu;
  double dvol_da = 0.0;
  double dkl_da = 0.0;
};

ComponentCtx build_component(const ModelState& st, int k, bool want_grads) {
  const KernelParams& p = st.kernels[static_cast<std::size_t>(k)];
  const SparseGPPosterior& gp = st.gps[static_cast<std::size_t>(k)];
  const Eigen::Index m = st.pseudo.count();

  ComponentCtx c;
  c.kc = kernel_cholesky(p, st.pseudo);
  c.sigma = gp.chol * gp.chol.transpose();
  c.kinv_mu = c.kc.llt.solve(gp.mu);
  c.centered = gp.mu.array() - st.hyper.prior_mean;
  c.psi = psi_matrix(p, st.pseudo, st.window);
  c.kinv_psi = c.kc.llt.solve(c.psi);
  c.kinv_psi_kinv = c.kc.llt.solve(c.kinv_psi.transpose());

  Eigen::MatrixXd second = c.sigma;
  second.noalias() += gp.mu * gp.mu.transpose();
  c.volume = p.gamma * st.window.length() - c.kinv_psi.trace() +
             (c.kinv_psi_kinv.array() * second.array()).sum();

  double logdet_sigma = 2.0 * gp.chol.diagonal().array().log().sum();
  double logdet_kmm = 2.0 * c.kc.llt.matrixLLT().diagonal().array().log().sum();
  Eigen::MatrixXd kinv_sigma = c.kc.llt.solve(c.sigma);
  c.kl = 0.5 * (logdet_sigma - logdet_kmm) + 0.5 * static_cast<double>(m) -
         0.5 * (kinv_sigma.trace() + c.centered.dot(c.kc.llt.solve(c.centered)));

  if (want_grads) {
    const double a3 = p.lengthscale * p.lengthscale * p.lengthscale;
    const Eigen::VectorXd& z = st.pseudo.locations;
    c.dkmm.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        double delta = z[i] - z[j];
        c.dkmm(i, j) = c.kc.kmm(i, j) * delta * delta / a3;
      }
    }
    c.dpsi = psi_matrix_dlengthscale(p, st.pseudo, st.window);
    c.dkmm_kinv_mu.noalias() = c.dkmm * c.kinv_mu;

    Eigen::MatrixXd kdk = c.kc.llt.solve(c.dkmm);
    Eigen::MatrixXd kdpsi = c.kc.llt.solve(c.dpsi);
    Eigen::MatrixXd kdpsik = c.kc.llt.solve(kdpsi.transpose());
    Eigen::MatrixXd kinv_second = c.kc.llt.solve(second);

    c.dvol_da = -(kdpsi.trace() - (kdk * c.kinv_psi).trace()) +
                (kdpsik.array() * second.array()).sum() -
                (kdk * c.kinv_psi_kinv * second).trace() -
                (c.kinv_psi_kinv * c.dkmm * kinv_second).trace();

    Eigen::MatrixXd sc = c.sigma;
    sc.noalias() += c.centered * c.centered.transpose();
    c.dkl_da = -0.5 * kdk.trace() + 0.5 * (kdk * c.kc.llt.solve(sc)).trace();
  }
  return c;
}

void validate_inputs(const ModelState& st, const Dataset& ds) {
  const int K = st.components();
  const int D = st.rows();
  if (K < 1) throw std::invalid_argument("evaluate_model: no components");
  if (D != static_cast<int>(ds.size())) {
    throw std::invalid_argument("evaluate_model: sequence count mismatch between state and data");
  }
  if (!(st.window == ds.window)) {
    throw std::invalid_argument("evaluate_model: state and data windows differ");
  }
  if (static_cast<int>(st.kernels.size()) != K || static_cast<int>(st.gps.size()) != K) {
    throw std::invalid_argument("evaluate_model: component array sizes disagree");
  }
  if (st.rates.eta.size() != D) {
    throw std::invalid_argument("evaluate_model: rate estimates missing for some sequences");
  }
  if (st.has_sticks()) {
    if (st.alloc.rows() != D || st.alloc.components() != K) {
      throw std::invalid_argument("evaluate_model: allocation posterior shape mismatch");
    }
  } else {
    if (st.lppa_theta.rows() != D || static_cast<int>(st.lppa_theta.cols()) != K) {
      throw std::invalid_argument("evaluate_model: point allocation shape mismatch");
    }
  }
  const Eigen::Index m = st.pseudo.count();
  for (const auto& gp : st.gps) {
    if (gp.mu.size() != m || gp.chol.rows() != m || gp.chol.cols() != m) {
      throw std::invalid_argument("evaluate_model: GP posterior size does not match pseudo inputs");
    }
  }
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::lppa: return "lppa";
    case Variant::banppa_nc: return "banppa-nc";
    case Variant::banppa: return "banppa";
  }
  throw std::logic_error("variant_name: unreachable");
}

Variant parse_variant(const std::string& name) {
  if (name == "lppa") return Variant::lppa;
  if (name == "banppa-nc") return Variant::banppa_nc;
  if (name == "banppa") return Variant::banppa;
  throw std::invalid_argument("unknown variant '" + name + "' (expected lppa, banppa-nc, banppa)");
}

int ModelState::components() const {
  return variant == Variant::lppa ? static_cast<int>(lppa_theta.cols()) : alloc.components();
}

Eigen::VectorXd stick_means(const AllocationPosterior& alloc, int d) {
  const int k1 = static_cast<int>(alloc.tau0.cols());
  Eigen::VectorXd out(k1 + 1);
  // telescoping keeps the weights summing to one exactly, including in
  // floating point: each weight is a difference of consecutive remainders
  double remainder = 1.0;
  for (int j = 0; j < k1; ++j) {
    double t0 = alloc.tau0(d, j);
    double t1 = alloc.tau1(d, j);
    double next = remainder * (t1 / (t0 + t1));
    out[j] = remainder - next;
    remainder = next;
  }
  out[k1] = remainder;
  return out;
}

void expected_log_sticks(const AllocationPosterior& alloc, int d, Eigen::VectorXd& log_stick,
                         Eigen::VectorXd& log_rest) {
  const int k1 = static_cast<int>(alloc.tau0.cols());
  log_stick.resize(k1);
  log_rest.resize(k1);
  for (int j = 0; j < k1; ++j) {
    double t0 = alloc.tau0(d, j);
    double t1 = alloc.tau1(d, j);
    double psum = digamma(t0 + t1);
    log_stick[j] = digamma(t0) - psum;
    log_rest[j] = digamma(t1) - psum;
  }
}

Eigen::VectorXd mean_weights(const ModelState& state, int d) {
  if (d < 0 || d >= state.rows()) throw std::invalid_argument("mean_weights: sequence index");
  if (state.has_sticks()) return stick_means(state.alloc, d);
  return state.lppa_theta.row(d).matrix().transpose();
}

Eigen::ArrayXXd expected_weights(const ModelState& state) {
  const int D = state.rows();
  const int K = state.components();
  Eigen::ArrayXXd out(D, K);
  for (int d = 0; d < D; ++d) out.row(d) = mean_weights(state, d).transpose().array();
  return out;
}

AugLagMultipliers AugLagMultipliers::initial(int k, double target_volume) {
  AugLagMultipliers m;
  m.w = Eigen::VectorXd::Ones(k);
  m.v = Eigen::VectorXd::Constant(k, 4.0);
  m.target_volume = target_volume;
  return m;
}

AugLagMultipliers AugLagMultipliers::zero(int k, double target_volume) {
  AugLagMultipliers m;
  m.w = Eigen::VectorXd::Zero(k);
  m.v = Eigen::VectorXd::Zero(k);
  m.target_volume = target_volume;
  return m;
}

Evaluation evaluate_model(const ModelState& st, const AugLagMultipliers* mult, const Dataset& ds,
                          const GTable& table, GradRequest req, parallel::Exec exec) {
  validate_inputs(st, ds);
  const int K = st.components();
  const int D = st.rows();
  const Eigen::Index M = st.pseudo.count();
  const FlatEvents fe = flatten(ds);
  const std::size_t N = fe.times.size();
  const bool want_gp = req.gp;
  const bool want_alloc = req.alloc;
  const bool want_grads = req.any();

  // Pass A: per-component geometry, volumes, KL terms.
  std::vector<ComponentCtx> ctx(static_cast<std::size_t>(K));
  parallel::for_index(static_cast<std::size_t>(K), exec, [&](std::size_t k) {
    ctx[k] = build_component(st, static_cast<int>(k), want_gp);
  });

  // Pass B: expected log-square moments per (component, event).
  Eigen::MatrixXd elg(K, static_cast<Eigen::Index>(N));
  Eigen::MatrixXd dmean, dvar;
  if (want_gp) {
    dmean.resize(K, static_cast<Eigen::Index>(N));
    dvar.resize(K, static_cast<Eigen::Index>(N));
  }
  parallel::for_index(N, exec, [&](std::size_t n) {
    const double t = fe.times[n];
    Eigen::VectorXd kt(M), b(M), sb(M);
    for (int k = 0; k < K; ++k) {
      const KernelParams& p = st.kernels[static_cast<std::size_t>(k)];
      const SparseGPPosterior& gp = st.gps[static_cast<std::size_t>(k)];
      const double inv2a2 = 1.0 / (2.0 * p.lengthscale * p.lengthscale);
      for (Eigen::Index i = 0; i < M; ++i) {
        double dd = t - st.pseudo.locations[i];
        kt[i] = p.gamma * std::exp(-dd * dd * inv2a2);
      }
      b = ctx[static_cast<std::size_t>(k)].kc.llt.solve(kt);
      sb.noalias() = gp.chol * (gp.chol.transpose() * b);
      double mean = kt.dot(ctx[static_cast<std::size_t>(k)].kinv_mu);
      double raw = p.gamma - kt.dot(b) + b.dot(sb);
      bool clamped = raw < kVarianceFloor;
      double var = clamped ? kVarianceFloor : raw;
      auto col = static_cast<Eigen::Index>(n);
      if (want_gp) {
        LogSquareMoment g = expected_log_square_grad(mean, var, table);
        elg(k, col) = g.value;
        dmean(k, col) = g.d_mean;
        dvar(k, col) = clamped ? 0.0 : g.d_var;
      } else {
        elg(k, col) = expected_log_square(mean, var, table);
      }
    }
  });

  // Pass C: per-sequence terms, responsibilities, allocation gradients.
  Eigen::VectorXd evt = Eigen::VectorXd::Zero(D);
  Eigen::VectorXd beta_term = Eigen::VectorXd::Zero(D);
  Eigen::VectorXd vol_term = Eigen::VectorXd::Zero(D);
  Eigen::ArrayXXd eweights(D, K);
  Eigen::VectorXd volumes(K);
  for (int k = 0; k < K; ++k) volumes[k] = ctx[static_cast<std::size_t>(k)].volume;

  Evaluation out;
  Eigen::MatrixXd resp;
  if (want_gp) {
    resp.resize(K, static_cast<Eigen::Index>(N));
    out.grads.gp.resize(static_cast<std::size_t>(K));
  }
  if (want_alloc) {
    if (st.has_sticks()) {
      out.grads.tau0.setZero(D, K - 1);
      out.grads.tau1.setZero(D, K - 1);
    } else {
      out.grads.theta.setZero(D, K);
    }
  }

  const double alpha = st.hyper.alpha;
  parallel::for_index(static_cast<std::size_t>(D), exec, [&](std::size_t du) {
    const int d = static_cast<int>(du);
    const int k1 = K - 1;
    Eigen::VectorXd lnw(K);
    Eigen::VectorXd t0s, t1s, psi0, psi1, psis, tg0, tg1, tgs, prefix;
    if (st.has_sticks()) {
      t0s.resize(k1);
      t1s.resize(k1);
      psi0.resize(k1);
      psi1.resize(k1);
      psis.resize(k1);
      double acc = 0.0;
      for (int j = 0; j < k1; ++j) {
        t0s[j] = st.alloc.tau0(d, j);
        t1s[j] = st.alloc.tau1(d, j);
        psi0[j] = digamma(t0s[j]);
        psi1[j] = digamma(t1s[j]);
        psis[j] = digamma(t0s[j] + t1s[j]);
        lnw[j] = acc + (psi0[j] - psis[j]);
        acc += psi1[j] - psis[j];
      }
      lnw[k1] = acc;
      eweights.row(d) = stick_means(st.alloc, d).transpose().array();
      if (want_alloc) {
        tg0.resize(k1);
        tg1.resize(k1);
        tgs.resize(k1);
        for (int j = 0; j < k1; ++j) {
          tg0[j] = trigamma(t0s[j]);
          tg1[j] = trigamma(t1s[j]);
          tgs[j] = trigamma(t0s[j] + t1s[j]);
        }
      }
    } else {
      for (int k = 0; k < K; ++k) lnw[k] = std::log(st.lppa_theta(d, k));
      eweights.row(d) = st.lppa_theta.row(d);
    }

    double ev = 0.0;
    Eigen::VectorXd lp(K), r(K), suffix(K + 1);
    for (std::size_t n = fe.offset[du]; n < fe.offset[du + 1]; ++n) {
      auto col = static_cast<Eigen::Index>(n);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        lp[k] = lnw[k] + elg(k, col);
        mx = std::max(mx, lp[k]);
      }
      double sum = 0.0;
      for (int k = 0; k < K; ++k) sum += std::exp(lp[k] - mx);
      double lse = mx + std::log(sum);
      ev += lse;
      if (want_grads) {
        for (int k = 0; k < K; ++k) r[k] = std::exp(lp[k] - lse);
        if (want_gp) {
          for (int k = 0; k < K; ++k) resp(k, col) = r[k];
        }
        if (want_alloc) {
          if (st.has_sticks()) {
            suffix[K] = 0.0;
            for (int k = K - 1; k >= 0; --k) suffix[k] = suffix[k + 1] + r[k];
            for (int j = 0; j < k1; ++j) {
              out.grads.tau0(d, j) += r[j] * tg0[j] - suffix[j] * tgs[j];
              out.grads.tau1(d, j) += suffix[j + 1] * tg1[j] - suffix[j] * tgs[j];
            }
          } else {
            for (int k = 0; k < K; ++k) out.grads.theta(d, k) += r[k] / st.lppa_theta(d, k);
          }
        }
      }
    }

    const double eta_d = st.rates.eta[d];
    const auto nd = static_cast<double>(fe.offset[du + 1] - fe.offset[du]);
    if (st.has_sticks()) ev += nd * std::log(eta_d);
    evt[d] = ev;

    double mass = 0.0;
    for (int k = 0; k < K; ++k) mass += eweights(d, k) * volumes[k];
    vol_term[d] = -eta_d * mass;

    if (st.has_sticks()) {
      double bt = 0.0;
      for (int j = 0; j < k1; ++j) {
        double els = psi0[j] - psis[j];
        double elr = psi1[j] - psis[j];
        bt += std::log(alpha) + (alpha - 1.0) * elr -
              (std::lgamma(t0s[j] + t1s[j]) - std::lgamma(t0s[j]) - std::lgamma(t1s[j]) +
               (t0s[j] - 1.0) * els + (t1s[j] - 1.0) * elr);
      }
      beta_term[d] = bt;
    }

    if (want_alloc) {
      if (st.has_sticks()) {
        // beta-term gradient
        for (int j = 0; j < k1; ++j) {
          double common = (t0s[j] - 1.0 + t1s[j] - alpha) * tgs[j];
          out.grads.tau0(d, j) += -(t0s[j] - 1.0) * tg0[j] + common;
          out.grads.tau1(d, j) += -(t1s[j] - alpha) * tg1[j] + common;
        }
        // volume-term gradient through the expected weights
        Eigen::VectorXd means(k1), pre(K);
        pre[0] = 1.0;
        for (int j = 0; j < k1; ++j) {
          means[j] = t0s[j] / (t0s[j] + t1s[j]);
          pre[j + 1] = pre[j] * (1.0 - means[j]);
        }
        for (int j = 0; j < k1; ++j) {
          double acc = volumes[j] * pre[j];
          double run = pre[j];
          for (int k = j + 1; k < K; ++k) {
            double mk = k < k1 ? means[k] : 1.0;
            acc -= volumes[k] * mk * run;
            if (k < k1) run *= 1.0 - means[k];
          }
          double tp = t0s[j] + t1s[j];
          out.grads.tau0(d, j) += -eta_d * acc * (t1s[j] / (tp * tp));
          out.grads.tau1(d, j) += -eta_d * acc * (-t0s[j] / (tp * tp));
        }
      } else {
        for (int k = 0; k < K; ++k) out.grads.theta(d, k) -= volumes[k];
      }
    }
  });

  // Serial reductions in index order keep results independent of threading.
  ElboTerms terms;
  for (int d = 0; d < D; ++d) terms.event += evt[d];
  for (int d = 0; d < D; ++d) terms.volume += vol_term[d];
  if (st.has_sticks()) {
    for (int d = 0; d < D; ++d) terms.beta += beta_term[d];
    const double a0 = st.hyper.a0;
    const double b0 = st.hyper.b0;
    double rp = 0.0;
    for (int d = 0; d < D; ++d) {
      rp += a0 * std::log(b0) - std::lgamma(a0) + (a0 - 1.0) * std::log(st.rates.eta[d]) -
            b0 * st.rates.eta[d];
    }
    terms.rate_prior = rp;
  }
  for (int k = 0; k < K; ++k) terms.gp_kl += ctx[static_cast<std::size_t>(k)].kl;

  out.terms = terms;
  out.volumes = volumes;
  double penalty = 0.0;
  if (mult != nullptr) {
    out.residuals = volumes.array() - mult->target_volume;
    if (st.variant == Variant::banppa) {
      for (int k = 0; k < K; ++k) {
        double h = out.residuals[k];
        penalty += mult->w[k] * h + 0.5 * mult->v[k] * h * h;
      }
    }
  }
  out.objective = terms.total() - penalty;

  if (!want_gp) return out;

  // dObjective/dV_k collects the allocation mass and the penalty pull.
  Eigen::VectorXd vol_coef = Eigen::VectorXd::Zero(K);
  for (int d = 0; d < D; ++d) {
    for (int k = 0; k < K; ++k) vol_coef[k] -= st.rates.eta[d] * eweights(d, k);
  }
  if (mult != nullptr && st.variant == Variant::banppa) {
    for (int k = 0; k < K; ++k) {
      vol_coef[k] -= mult->w[k] + mult->v[k] * (volumes[k] - mult->target_volume);
    }
  }

  // Pass D: GP-block gradients, one component per slot.
  parallel::for_index(static_cast<std::size_t>(K), exec, [&](std::size_t ku) {
    const int k = static_cast<int>(ku);
    const ComponentCtx& c = ctx[ku];
    const KernelParams& p = st.kernels[ku];
    const SparseGPPosterior& gp = st.gps[ku];
    const double inv2a2 = 1.0 / (2.0 * p.lengthscale * p.lengthscale);
    const double a3 = p.lengthscale * p.lengthscale * p.lengthscale;

    Eigen::VectorXd gmu = Eigen::VectorXd::Zero(M);
    Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(M, M);
    double ga = 0.0;
    Eigen::VectorXd kt(M), dkt(M), b(M), sb(M), q(M), db(M), dq(M);
    for (std::size_t n = 0; n < N; ++n) {
      auto col = static_cast<Eigen::Index>(n);
      const double t = fe.times[n];
      for (Eigen::Index i = 0; i < M; ++i) {
        double dd = t - st.pseudo.locations[i];
        kt[i] = p.gamma * std::exp(-dd * dd * inv2a2);
        dkt[i] = kt[i] * dd * dd / a3;
      }
      b = c.kc.llt.solve(kt);
      sb.noalias() = gp.chol * (gp.chol.transpose() * b);
      q = c.kc.llt.solve(sb);
      const double cm = resp(k, col) * dmean(k, col);
      const double cv = resp(k, col) * dvar(k, col);
      gmu.noalias() += cm * b;
      w2.selfadjointView<Eigen::Lower>().rankUpdate(b, cv);
      db.noalias() = c.dkmm * b;
      dq.noalias() = c.dkmm * q;
      double dmean_da = dkt.dot(c.kinv_mu) - b.dot(c.dkmm_kinv_mu);
      double dvar_da = -2.0 * dkt.dot(b) + b.dot(db) + 2.0 * dkt.dot(q) - 2.0 * b.dot(dq);
      ga += cm * dmean_da + cv * dvar_da;
    }

    GpBlockGrad& g = out.grads.gp[ku];
    g.mu = gmu + vol_coef[k] * 2.0 * (c.kinv_psi_kinv * gp.mu) - c.kc.llt.solve(c.centered);
    Eigen::MatrixXd w2full = w2.selfadjointView<Eigen::Lower>();
    Eigen::MatrixXd gl = 2.0 * (w2full * gp.chol) + vol_coef[k] * 2.0 * (c.kinv_psi_kinv * gp.chol);
    gl += Eigen::MatrixXd((1.0 / gp.chol.diagonal().array()).matrix().asDiagonal());
    gl -= c.kc.llt.solve(gp.chol);
    g.chol = gl.triangularView<Eigen::Lower>();
    g.lengthscale = ga + vol_coef[k] * c.dvol_da + c.dkl_da;
  });

  return out;
}

double elbo(const ModelState& state, const Dataset& ds) {
  return evaluate_model(state, nullptr, ds, default_gtable(), GradRequest::none()).objective;
}

ElboTerms test_elbo_terms(const ModelState& state, const Dataset& ds) {
  return evaluate_model(state, nullptr, ds, default_gtable(), GradRequest::none()).terms;
}

Eigen::VectorXd compute_ldnk(const ModelState& state, const Dataset& ds, int d, int n) {
  if (d < 0 || d >= static_cast<int>(ds.size())) {
    throw std::invalid_argument("compute_ldnk: sequence index out of range");
  }
  const auto& events = ds.sequences[static_cast<std::size_t>(d)].events;
  if (n < 0 || n >= static_cast<int>(events.size())) {
    throw std::invalid_argument("compute_ldnk: event index out of range");
  }
  const int K = state.components();
  Eigen::VectorXd lnw(K);
  if (state.has_sticks()) {
    Eigen::VectorXd els, elr;
    expected_log_sticks(state.alloc, d, els, elr);
    double acc = 0.0;
    for (int k = 0; k < K - 1; ++k) {
      lnw[k] = acc + els[k];
      acc += elr[k];
    }
    lnw[K - 1] = acc;
  } else {
    for (int k = 0; k < K; ++k) lnw[k] = std::log(state.lppa_theta(d, k));
  }
  Eigen::VectorXd query(1), mean, var, out(K);
  query[0] = events[static_cast<std::size_t>(n)];
  for (int k = 0; k < K; ++k) {
    predictive_moments(state.gps[static_cast<std::size_t>(k)],
                       state.kernels[static_cast<std::size_t>(k)], state.pseudo, query, mean, var);
    out[k] = std::exp(lnw[k] + expected_log_square(mean[0], var[0]));
  }
  return out;
}

double constraint_residual(const ModelState& state, int k, double target_volume) {
  if (state.variant != Variant::banppa) {
    throw std::invalid_argument("constraint_residual: only the constrained variant has one");
  }
  if (k < 0 || k >= state.components()) {
    throw std::invalid_argument("constraint_residual: component index out of range");
  }
  auto ku = static_cast<std::size_t>(k);
  return expected_integral_square(state.gps[ku], state.kernels[ku], state.pseudo, state.window) -
         target_volume;
}

double augmented_objective(const ModelState& state, const AugLagMultipliers& mult,
                           const Dataset& ds) {
  return evaluate_model(state, &mult, ds, default_gtable(), GradRequest::none()).objective;
}

ModelGradients grad_gp(const ModelState& state, const AugLagMultipliers* mult, const Dataset& ds) {
  return evaluate_model(state, mult, ds, default_gtable(), GradRequest{true, false}).grads;
}

ModelGradients grad_tau(const ModelState& state, const Dataset& ds) {
  if (!state.has_sticks()) {
    throw std::invalid_argument("grad_tau: the point-allocation variant has no stick posterior");
  }
  return evaluate_model(state, nullptr, ds, default_gtable(), GradRequest{false, true}).grads;
}

Eigen::VectorXd component_volumes(const ModelState& state) {
  const int K = state.components();
  Eigen::VectorXd out(K);
  for (int k = 0; k < K; ++k) {
    auto ku = static_cast<std::size_t>(k);
    out[k] =
        expected_integral_square(state.gps[ku], state.kernels[ku], state.pseudo, state.window);
  }
  return out;
}

RatePointEstimates update_eta_closed_form(const ModelState& state, const Dataset& ds) {
  if (!state.has_sticks()) {
    throw std::invalid_argument("update_eta_closed_form: unit rates are fixed for lppa");
  }
  if (state.rows() != static_cast<int>(ds.size())) {
    throw std::invalid_argument("update_eta_closed_form: sequence count mismatch");
  }
  const Eigen::VectorXd volumes = component_volumes(state);
  const Eigen::ArrayXXd ew = expected_weights(state);
  const int D = state.rows();
  RatePointEstimates out;
  out.eta.resize(D);
  int clamped = 0;
  for (int d = 0; d < D; ++d) {
    double numer =
        static_cast<double>(ds.sequences[static_cast<std::size_t>(d)].count()) + state.hyper.a0 -
        1.0;
    double denom = state.hyper.b0 + (ew.row(d).transpose() * volumes.array()).sum();
    double eta = numer / denom;
    if (!(eta > kEtaFloor)) {
      eta = kEtaFloor;
      ++clamped;
    }
    out.eta[d] = eta;
  }
  if (clamped > 0) {
    std::cerr << "banppa: clamped " << clamped << " rate estimate(s) at the positivity floor\n";
  }
  return out;
}

double update_alpha_closed_form(const ModelState& state) {
  if (!state.has_sticks()) {
    throw std::invalid_argument("update_alpha_closed_form: lppa has no concentration");
  }
  const int D = state.rows();
  const int k1 = state.components() - 1;
  if (k1 < 1) {
    throw std::invalid_argument("update_alpha_closed_form: needs at least two components");
  }
  double denom = 0.0;
  for (int d = 0; d < D; ++d) {
    for (int j = 0; j < k1; ++j) {
      denom += digamma(state.alloc.tau0(d, j) + state.alloc.tau1(d, j)) -
               digamma(state.alloc.tau1(d, j));
    }
  }
  if (!(denom > 0.0)) {
    throw NumericalError("update_alpha_closed_form: nonpositive expected log-remainder mass");
  }
  return static_cast<double>(D) * static_cast<double>(k1) / denom;
}

}  // namespace banppa
