#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "banppa/errors.hpp"
#include "banppa/gtable.hpp"
#include "banppa/model.hpp"
#include "oracles.hpp"

using namespace banppa;

namespace {

// Collapsed per-event log weights reassembled from the public stick moments.
Eigen::VectorXd collapsed_log_weights(const ModelState& st, int d) {
  const int K = st.components();
  Eigen::VectorXd lnw(K);
  if (st.has_sticks()) {
    Eigen::VectorXd els, elr;
    expected_log_sticks(st.alloc, d, els, elr);
    double acc = 0.0;
    for (int k = 0; k < K - 1; ++k) {
      lnw[k] = acc + els[k];
      acc += elr[k];
    }
    lnw[K - 1] = acc;
  } else {
    for (int k = 0; k < K; ++k) lnw[k] = std::log(st.lppa_theta(d, k));
  }
  return lnw;
}

double event_log_moment(const ModelState& st, int k, double t) {
  Eigen::VectorXd query(1), mean, var;
  query[0] = t;
  predictive_moments(st.gps[static_cast<std::size_t>(k)], st.kernels[static_cast<std::size_t>(k)],
                     st.pseudo, query, mean, var);
  return expected_log_square(mean[0], var[0]);
}

ElboTerms composed_terms(const ModelState& st, const Dataset& ds) {
  const int K = st.components();
  const int D = st.rows();
  ElboTerms t;
  const Eigen::VectorXd volumes = component_volumes(st);
  for (int d = 0; d < D; ++d) {
    const Eigen::VectorXd lnw = collapsed_log_weights(st, d);
    double ev = 0.0;
    for (double time : ds.sequences[static_cast<std::size_t>(d)].events) {
      Eigen::ArrayXd lp(K);
      for (int k = 0; k < K; ++k) lp[k] = lnw[k] + event_log_moment(st, k, time);
      const double mx = lp.maxCoeff();
      ev += mx + std::log((lp - mx).exp().sum());
    }
    if (st.has_sticks()) {
      ev += static_cast<double>(ds.sequences[static_cast<std::size_t>(d)].count()) *
            std::log(st.rates.eta[d]);
    }
    t.event += ev;

    const Eigen::VectorXd weights = mean_weights(st, d);
    t.volume -= st.rates.eta[d] * weights.dot(volumes);

    if (st.has_sticks()) {
      Eigen::VectorXd els, elr;
      expected_log_sticks(st.alloc, d, els, elr);
      for (int j = 0; j < K - 1; ++j) {
        const double t0 = st.alloc.tau0(d, j);
        const double t1 = st.alloc.tau1(d, j);
        t.beta += std::log(st.hyper.alpha) + (st.hyper.alpha - 1.0) * elr[j] -
                  (std::lgamma(t0 + t1) - std::lgamma(t0) - std::lgamma(t1) +
                   (t0 - 1.0) * els[j] + (t1 - 1.0) * elr[j]);
      }
      t.rate_prior += st.hyper.a0 * std::log(st.hyper.b0) - std::lgamma(st.hyper.a0) +
                      (st.hyper.a0 - 1.0) * std::log(st.rates.eta[d]) -
                      st.hyper.b0 * st.rates.eta[d];
    }
  }
  for (int k = 0; k < K; ++k) {
    t.gp_kl += gp_kl_term(st.gps[static_cast<std::size_t>(k)],
                          st.kernels[static_cast<std::size_t>(k)], st.pseudo,
                          st.hyper.prior_mean);
  }
  return t;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::lppa, Variant::banppa_nc, Variant::banppa}) {
    CHECK(parse_variant(variant_name(v)) == v);
  }
  CHECK(variant_name(Variant::banppa_nc) == "banppa-nc");
  CHECK_THROWS_AS(parse_variant("BANPPA"), std::invalid_argument);
}

TEST_CASE("stick means") {
  AllocationPosterior alloc;
  alloc.tau0 = Eigen::ArrayXXd::Ones(1, 2);
  alloc.tau1 = Eigen::ArrayXXd::Ones(1, 2);
  Eigen::VectorXd m = stick_means(alloc, 0);
  CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m[1] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(m[2] == doctest::Approx(0.25).epsilon(1e-14));

  alloc.tau0.setConstant(1e6);
  alloc.tau1.setConstant(1.0);
  m = stick_means(alloc, 0);
  CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(m[1] < 2e-6);
  CHECK(m[2] < 2e-12);

  Rng rng = make_rng(99);
  std::uniform_real_distribution<double> unit(0.2, 3.0);
  alloc.tau0.resize(1, 6);
  alloc.tau1.resize(1, 6);
  for (int rep = 0; rep < 20; ++rep) {
    for (int j = 0; j < 6; ++j) {
      alloc.tau0(0, j) = unit(rng);
      alloc.tau1(0, j) = unit(rng);
    }
    m = stick_means(alloc, 0);
    CHECK(m.minCoeff() > 0.0);
    CHECK(std::abs(m.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("expected log sticks against digamma identities") {
  AllocationPosterior alloc;
  alloc.tau0.resize(1, 2);
  alloc.tau1.resize(1, 2);
  alloc.tau0 << 1.0, 2.0;
  alloc.tau1 << 1.0, 1.0;
  Eigen::VectorXd els, elr;
  expected_log_sticks(alloc, 0, els, elr);
  // psi(1) - psi(2) = -1, psi(2) - psi(3) = -1/2
  CHECK(els[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(elr[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(els[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(els.maxCoeff() < 0.0);
  CHECK(elr.maxCoeff() < 0.0);
}

TEST_CASE("elbo terms recompose from public pieces") {
  const TimeWindow window{0.0, 20.0};
  const Dataset ds = oracles::random_dataset(3, window, 7, 21);

  for (Variant v : {Variant::lppa, Variant::banppa_nc, Variant::banppa}) {
    CAPTURE(variant_name(v));
    const ModelState st = oracles::random_state(v, 3, 3, 5, window, 77);
    const ElboTerms got = test_elbo_terms(st, ds);
    const ElboTerms want = composed_terms(st, ds);
    CHECK(got.event == doctest::Approx(want.event).epsilon(1e-10));
    CHECK(got.volume == doctest::Approx(want.volume).epsilon(1e-10));
    CHECK(got.beta == doctest::Approx(want.beta).epsilon(1e-10));
    CHECK(got.rate_prior == doctest::Approx(want.rate_prior).epsilon(1e-10));
    CHECK(got.gp_kl == doctest::Approx(want.gp_kl).epsilon(1e-10));
    CHECK(elbo(st, ds) == doctest::Approx(got.total()).epsilon(1e-12));
  }
}

TEST_CASE("elbo hand composition for one sequence, one event, one component") {
  Dataset ds;
  ds.window = {0.0, 2.0};
  ds.sequences.push_back({"only", {1.3}});

  ModelState st;
  st.variant = Variant::lppa;
  st.window = ds.window;
  st.sequence_ids = {"only"};
  st.pseudo = PseudoInputs::equispaced(ds.window, 1);
  st.kernels.push_back({1.5, 0.8, 1e-6});
  SparseGPPosterior gp;
  gp.mu = Eigen::VectorXd::Constant(1, 0.9);
  gp.chol = Eigen::MatrixXd::Constant(1, 1, 0.4);
  st.gps.push_back(gp);
  st.lppa_theta = Eigen::ArrayXXd::Constant(1, 1, 2.0);
  st.rates.eta = Eigen::VectorXd::Ones(1);
  st.hyper.prior_mean = 0.3;

  const ElboTerms t = test_elbo_terms(st, ds);
  const double elg = event_log_moment(st, 0, 1.3);
  const double volume = expected_integral_square(gp, st.kernels[0], st.pseudo, st.window);
  CHECK(t.event == doctest::Approx(std::log(2.0) + elg).epsilon(1e-12));
  CHECK(t.volume == doctest::Approx(-2.0 * volume).epsilon(1e-12));
  CHECK(t.beta == 0.0);
  CHECK(t.rate_prior == 0.0);
  CHECK(t.gp_kl == doctest::Approx(gp_kl_term(gp, st.kernels[0], st.pseudo, 0.3)).epsilon(1e-12));
}

TEST_CASE("beta term vanishes when the sticks sit at their prior") {
  const TimeWindow window{0.0, 15.0};
  const Dataset ds = oracles::random_dataset(2, window, 4, 5);
  ModelState st = oracles::random_state(Variant::banppa_nc, 2, 4, 4, window, 31);
  st.hyper.alpha = 1.7;
  st.alloc.tau0.setConstant(1.0);
  st.alloc.tau1.setConstant(st.hyper.alpha);
  CHECK(std::abs(test_elbo_terms(st, ds).beta) < 1e-12);
}

TEST_CASE("rate doubling moves exactly the predicted terms") {
  const TimeWindow window{0.0, 18.0};
  const Dataset ds = oracles::random_dataset(3, window, 6, 8);
  ModelState st = oracles::random_state(Variant::banppa_nc, 3, 3, 5, window, 14);
  const ElboTerms base = test_elbo_terms(st, ds);

  ModelState doubled = st;
  doubled.rates.eta *= 2.0;
  const ElboTerms after = test_elbo_terms(doubled, ds);

  const auto n_total = static_cast<double>(ds.total_events());
  const double d_num = static_cast<double>(ds.size());
  CHECK(after.event - base.event ==
        doctest::Approx(n_total * std::log(2.0)).epsilon(1e-10));
  CHECK(after.volume == doctest::Approx(2.0 * base.volume).epsilon(1e-12));
  const double rate_shift =
      d_num * (st.hyper.a0 - 1.0) * std::log(2.0) - st.hyper.b0 * st.rates.eta.sum();
  CHECK(after.rate_prior - base.rate_prior == doctest::Approx(rate_shift).epsilon(1e-10));
  CHECK(after.beta == base.beta);
  CHECK(after.gp_kl == base.gp_kl);
}

TEST_CASE("component relabeling leaves the bound unchanged") {
  const TimeWindow window{0.0, 12.0};
  const Dataset ds = oracles::random_dataset(2, window, 6, 9);
  ModelState st = oracles::random_state(Variant::lppa, 2, 2, 4, window, 55);
  ModelState swapped = st;
  std::swap(swapped.kernels[0], swapped.kernels[1]);
  std::swap(swapped.gps[0], swapped.gps[1]);
  swapped.lppa_theta.col(0).swap(swapped.lppa_theta.col(1));
  CHECK(elbo(st, ds) == doctest::Approx(elbo(swapped, ds)).epsilon(1e-12));
}

TEST_CASE("responsibilities from compute_ldnk") {
  const TimeWindow window{0.0, 10.0};
  Dataset ds;
  ds.window = window;
  ds.sequences.push_back({"a", {2.0, 7.5}});
  ds.sequences.push_back({"b", {4.4}});

  for (Variant v : {Variant::lppa, Variant::banppa}) {
    const ModelState st = oracles::random_state(v, 2, 3, 4, window, 61);
    const Eigen::VectorXd l = compute_ldnk(st, ds, 0, 1);
    REQUIRE(l.size() == 3);
    const Eigen::VectorXd lnw = collapsed_log_weights(st, 0);
    for (int k = 0; k < 3; ++k) {
      CHECK(l[k] > 0.0);
      CHECK(std::isfinite(l[k]));
      CHECK(l[k] ==
            doctest::Approx(std::exp(lnw[k] + event_log_moment(st, k, 7.5))).epsilon(1e-12));
    }
    // Normalized responsibilities form a distribution.
    CHECK((l / l.sum()).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(compute_ldnk(oracles::random_state(Variant::lppa, 2, 3, 4, window, 61), ds, 2, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_ldnk(oracles::random_state(Variant::lppa, 2, 3, 4, window, 61), ds, 1, 1),
                  std::invalid_argument);
}

TEST_CASE("log-square moment stays finite at the variance floor") {
  const TimeWindow window{0.0, 10.0};
  Dataset ds;
  ds.window = window;
  ds.sequences.push_back({"a", {1.0, 2.5, 5.0, 9.0}});
  ModelState st = oracles::random_state(Variant::banppa, 1, 2, 4, window, 8);
  for (auto& gp : st.gps) {
    gp.mu.setZero();
    gp.chol = Eigen::MatrixXd::Identity(4, 4) * 1e-9;
  }
  for (int n = 0; n < 4; ++n) {
    const Eigen::VectorXd l = compute_ldnk(st, ds, 0, n);
    for (int k = 0; k < 2; ++k) {
      CHECK(std::isfinite(l[k]));
      CHECK(l[k] > 0.0);
    }
  }
  CHECK(std::isfinite(elbo(st, ds)));
}

TEST_CASE("log-square moment obeys the concavity bound") {
  // E[ln f^2] <= ln E[f^2] for every Gaussian f.
  for (double mean : {0.0, 0.3, 1.0, 4.0, 11.0}) {
    for (double var : {1e-8, 0.1, 1.0, 7.0}) {
      CHECK(expected_log_square(mean, var) <= std::log(mean * mean + var) + 1e-12);
    }
  }
}

TEST_CASE("constraint residual") {
  const TimeWindow window{0.0, 25.0};
  const ModelState st = oracles::random_state(Variant::banppa, 2, 3, 5, window, 13);
  const Eigen::VectorXd volumes = component_volumes(st);
  for (int k = 0; k < 3; ++k) {
    CHECK(constraint_residual(st, k, volumes[k]) == 0.0);
  }
  const double target = 6304.0 / 200.0;
  CHECK(constraint_residual(st, 1, target) ==
        doctest::Approx(volumes[1] - 31.52).epsilon(1e-12));

  const ModelState lp = oracles::random_state(Variant::lppa, 2, 3, 5, window, 13);
  CHECK_THROWS_AS(constraint_residual(lp, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(constraint_residual(st, 3, 1.0), std::invalid_argument);
}

TEST_CASE("augmented objective") {
  const TimeWindow window{0.0, 16.0};
  const Dataset ds = oracles::random_dataset(2, window, 5, 3);
  const ModelState st = oracles::random_state(Variant::banppa, 2, 3, 4, window, 99);
  const double bound = elbo(st, ds);
  const Eigen::VectorXd volumes = component_volumes(st);

  SUBCASE("zero multipliers recover the bound") {
    const AugLagMultipliers zero = AugLagMultipliers::zero(3, 1.0);
    CHECK(augmented_objective(st, zero, ds) == doctest::Approx(bound).epsilon(1e-12));
  }
  SUBCASE("general multipliers subtract the explicit penalty") {
    AugLagMultipliers mult = AugLagMultipliers::initial(3, 2.0);
    mult.w << 0.5, -1.0, 2.0;
    mult.v << 4.0, 8.0, 1.0;
    double penalty = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double h = volumes[k] - mult.target_volume;
      penalty += mult.w[k] * h + 0.5 * mult.v[k] * h * h;
    }
    CHECK(augmented_objective(st, mult, ds) == doctest::Approx(bound - penalty).epsilon(1e-10));
  }
  SUBCASE("pinned vertex value") {
    // One component, target a quarter above its volume: penalty is
    // 1*(-1/4) + 2*(1/16) = -1/8, so the objective gains exactly 1/8.
    const ModelState one = oracles::random_state(Variant::banppa, 2, 1, 4, window, 7);
    const double v0 = component_volumes(one)[0];
    const AugLagMultipliers mult = AugLagMultipliers::initial(1, v0 + 0.25);
    CHECK(mult.w[0] == 1.0);
    CHECK(mult.v[0] == 4.0);
    CHECK(augmented_objective(one, mult, ds) ==
          doctest::Approx(elbo(one, ds) + 0.125).epsilon(1e-10));
  }
}

TEST_CASE("unconstrained variants ignore multipliers but report residuals") {
  const TimeWindow window{0.0, 16.0};
  const Dataset ds = oracles::random_dataset(2, window, 5, 3);
  const ModelState st = oracles::random_state(Variant::banppa_nc, 2, 3, 4, window, 42);
  AugLagMultipliers mult = AugLagMultipliers::initial(3, 5.0);
  const Evaluation ev = evaluate_model(st, &mult, ds, default_gtable(), GradRequest::none());
  CHECK(ev.objective == ev.terms.total());
  REQUIRE(ev.residuals.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(ev.residuals[k] == doctest::Approx(ev.volumes[k] - 5.0).epsilon(1e-12));
  }
}

TEST_CASE("zero multipliers make the constrained variant match its ablation bitwise") {
  const TimeWindow window{0.0, 22.0};
  const Dataset ds = oracles::random_dataset(3, window, 6, 17);
  ModelState con = oracles::random_state(Variant::banppa, 3, 3, 5, window, 23);
  ModelState nc = con;
  nc.variant = Variant::banppa_nc;

  const AugLagMultipliers zero = AugLagMultipliers::zero(3, 4.0);
  const Evaluation a = evaluate_model(con, &zero, ds, default_gtable(), GradRequest::all());
  const Evaluation b = evaluate_model(nc, &zero, ds, default_gtable(), GradRequest::all());

  CHECK(a.objective == b.objective);
  CHECK(a.terms.event == b.terms.event);
  CHECK(a.terms.volume == b.terms.volume);
  CHECK(a.terms.beta == b.terms.beta);
  CHECK(a.terms.rate_prior == b.terms.rate_prior);
  CHECK(a.terms.gp_kl == b.terms.gp_kl);
  CHECK((a.volumes.array() == b.volumes.array()).all());
  CHECK((a.grads.tau0 == b.grads.tau0).all());
  CHECK((a.grads.tau1 == b.grads.tau1).all());
  REQUIRE(a.grads.gp.size() == b.grads.gp.size());
  for (std::size_t k = 0; k < a.grads.gp.size(); ++k) {
    CHECK((a.grads.gp[k].mu.array() == b.grads.gp[k].mu.array()).all());
    CHECK((a.grads.gp[k].chol.array() == b.grads.gp[k].chol.array()).all());
    CHECK(a.grads.gp[k].lengthscale == b.grads.gp[k].lengthscale);
  }
}

TEST_CASE("closed-form rate update") {
  const TimeWindow window{0.0, 20.0};
  const Dataset ds = oracles::random_dataset(3, window, 7, 29);
  ModelState st = oracles::random_state(Variant::banppa, 3, 3, 5, window, 43);

  SUBCASE("matches the ratio of counts to expected mass") {
    const RatePointEstimates upd = update_eta_closed_form(st, ds);
    const Eigen::VectorXd volumes = component_volumes(st);
    for (int d = 0; d < 3; ++d) {
      const double numer =
          static_cast<double>(ds.sequences[static_cast<std::size_t>(d)].count()) +
          st.hyper.a0 - 1.0;
      const double denom = st.hyper.b0 + mean_weights(st, d).dot(volumes);
      CHECK(upd.eta[d] == doctest::Approx(numer / denom).epsilon(1e-12));
      CHECK(upd.eta[d] > 0.0);
    }
  }
  SUBCASE("does not lower the bound") {
    ModelState moved = st;
    moved.rates = update_eta_closed_form(st, ds);
    CHECK(elbo(moved, ds) >= elbo(st, ds) - 1e-9);
  }
  SUBCASE("empty sequence with a flat prior lands on the floor") {
    Dataset empty = ds;
    for (auto& s : empty.sequences) s.events.clear();
    st.hyper.a0 = 1.0;
    const RatePointEstimates upd = update_eta_closed_form(st, empty);
    for (int d = 0; d < 3; ++d) CHECK(upd.eta[d] == kEtaFloor);
  }
  SUBCASE("rejects the point-allocation variant") {
    const ModelState lp = oracles::random_state(Variant::lppa, 3, 3, 5, window, 43);
    CHECK_THROWS_AS(update_eta_closed_form(lp, ds), std::invalid_argument);
  }
}

TEST_CASE("closed-form concentration update") {
  const TimeWindow window{0.0, 20.0};

  SUBCASE("unit sticks give unit concentration") {
    ModelState st = oracles::random_state(Variant::banppa, 1, 2, 4, window, 3);
    st.alloc.tau0.setConstant(1.0);
    st.alloc.tau1.setConstant(1.0);
    CHECK(update_alpha_closed_form(st) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("maximizes the stick prior term") {
    const Dataset ds = oracles::random_dataset(3, window, 6, 4);
    ModelState st = oracles::random_state(Variant::banppa, 3, 4, 5, window, 5);
    const double before = test_elbo_terms(st, ds).beta;
    ModelState moved = st;
    moved.hyper.alpha = update_alpha_closed_form(st);
    CHECK(moved.hyper.alpha > 0.0);
    CHECK(test_elbo_terms(moved, ds).beta >= before - 1e-10);
    // Nearby concentrations do no better.
    for (double nudge : {0.8, 1.25}) {
      ModelState other = moved;
      other.hyper.alpha = moved.hyper.alpha * nudge;
      CHECK(test_elbo_terms(other, ds).beta <= test_elbo_terms(moved, ds).beta + 1e-10);
    }
  }
  SUBCASE("rejects lppa and single-component states") {
    const ModelState lp = oracles::random_state(Variant::lppa, 2, 3, 4, window, 6);
    CHECK_THROWS_AS(update_alpha_closed_form(lp), std::invalid_argument);
    const ModelState one = oracles::random_state(Variant::banppa, 2, 1, 4, window, 6);
    CHECK_THROWS_AS(update_alpha_closed_form(one), std::invalid_argument);
  }
}

TEST_CASE("expected weights form a simplex row per sequence") {
  const TimeWindow window{0.0, 20.0};
  const ModelState st = oracles::random_state(Variant::banppa, 4, 5, 4, window, 71);
  const Eigen::ArrayXXd w = expected_weights(st);
  REQUIRE(w.rows() == 4);
  REQUIRE(w.cols() == 5);
  for (int d = 0; d < 4; ++d) {
    CHECK(std::abs(w.row(d).sum() - 1.0) < 1e-12);
    CHECK(w.row(d).minCoeff() > 0.0);
  }
  const ModelState lp = oracles::random_state(Variant::lppa, 4, 5, 4, window, 71);
  CHECK((expected_weights(lp) == lp.lppa_theta).all());
}

TEST_CASE("state and data shape validation") {
  const TimeWindow window{0.0, 10.0};
  const Dataset ds = oracles::random_dataset(3, window, 4, 2);
  const GTable& table = default_gtable();

  ModelState st = oracles::random_state(Variant::banppa, 2, 3, 4, window, 1);
  CHECK_THROWS_AS(evaluate_model(st, nullptr, ds, table, GradRequest::none()),
                  std::invalid_argument);

  st = oracles::random_state(Variant::banppa, 3, 3, 4, window, 1);
  st.window = {0.0, 11.0};
  CHECK_THROWS_AS(evaluate_model(st, nullptr, ds, table, GradRequest::none()),
                  std::invalid_argument);

  st = oracles::random_state(Variant::banppa, 3, 3, 4, window, 1);
  st.gps[1].mu = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(evaluate_model(st, nullptr, ds, table, GradRequest::none()),
                  std::invalid_argument);

  st = oracles::random_state(Variant::banppa, 3, 3, 4, window, 1);
  st.rates.eta = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(evaluate_model(st, nullptr, ds, table, GradRequest::none()),
                  std::invalid_argument);

  st = oracles::random_state(Variant::lppa, 3, 3, 4, window, 1);
  st.lppa_theta = Eigen::ArrayXXd::Ones(3, 2);
  CHECK_THROWS_AS(evaluate_model(st, nullptr, ds, table, GradRequest::none()),
                  std::invalid_argument);

  CHECK_THROWS_AS(mean_weights(oracles::random_state(Variant::banppa, 3, 3, 4, window, 1), 3),
                  std::invalid_argument);
}

TEST_CASE("gp prior term is nonpositive and zero at the prior") {
  const TimeWindow window{0.0, 20.0};
  const Dataset ds = oracles::random_dataset(2, window, 5, 33);
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    const ModelState st = oracles::random_state(Variant::banppa, 2, 3, 5, window, seed);
    CHECK(test_elbo_terms(st, ds).gp_kl < 0.0);
  }

  ModelState prior = oracles::random_state(Variant::banppa, 2, 2, 5, window, 104);
  for (int k = 0; k < 2; ++k) {
    KernelCholesky kc = kernel_cholesky(prior.kernels[static_cast<std::size_t>(k)], prior.pseudo);
    prior.gps[static_cast<std::size_t>(k)].mu =
        Eigen::VectorXd::Constant(5, prior.hyper.prior_mean);
    prior.gps[static_cast<std::size_t>(k)].chol = kc.llt.matrixL();
  }
  CHECK(std::abs(test_elbo_terms(prior, ds).gp_kl) < 1e-9);
}
