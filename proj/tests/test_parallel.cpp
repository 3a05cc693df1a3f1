#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include <banppa/gtable.hpp>
#include <banppa/model.hpp>
#include <banppa/parallel.hpp>

#include "oracles.hpp"

using namespace banppa;
using parallel::Exec;

namespace {

// Restores the process-wide default on scope exit so test order cannot leak.
struct ExecGuard {
  Exec saved = parallel::default_exec();
  ~ExecGuard() { parallel::set_default_exec(saved); }
};

void require_bitwise(const Evaluation& a, const Evaluation& b) {
  CHECK(a.objective == b.objective);
  CHECK(a.terms.event == b.terms.event);
  CHECK(a.terms.volume == b.terms.volume);
  CHECK(a.terms.beta == b.terms.beta);
  CHECK(a.terms.rate_prior == b.terms.rate_prior);
  CHECK(a.terms.gp_kl == b.terms.gp_kl);
  REQUIRE(a.volumes.size() == b.volumes.size());
  CHECK((a.volumes.array() == b.volumes.array()).all());
  REQUIRE(a.residuals.size() == b.residuals.size());
  if (a.residuals.size() > 0) {
    CHECK((a.residuals.array() == b.residuals.array()).all());
  }
  REQUIRE(a.grads.gp.size() == b.grads.gp.size());
  for (std::size_t k = 0; k < a.grads.gp.size(); ++k) {
    CAPTURE(k);
    CHECK((a.grads.gp[k].mu.array() == b.grads.gp[k].mu.array()).all());
    CHECK((a.grads.gp[k].chol.array() == b.grads.gp[k].chol.array()).all());
    CHECK(a.grads.gp[k].lengthscale == b.grads.gp[k].lengthscale);
  }
  CHECK(a.grads.tau0.size() == b.grads.tau0.size());
  if (a.grads.tau0.size() > 0) {
    CHECK((a.grads.tau0 == b.grads.tau0).all());
    CHECK((a.grads.tau1 == b.grads.tau1).all());
  }
  CHECK(a.grads.theta.size() == b.grads.theta.size());
  if (a.grads.theta.size() > 0) {
    CHECK((a.grads.theta == b.grads.theta).all());
  }
}

}  // namespace

TEST_CASE("hardware thread count is sane") {
  CHECK(parallel::hardware_threads() >= 1);
}

TEST_CASE("default exec round trip") {
  ExecGuard guard;
  parallel::set_default_exec(Exec::serial);
  CHECK(parallel::default_exec() == Exec::serial);
  parallel::set_default_exec(Exec::openmp);
  CHECK(parallel::default_exec() == Exec::openmp);
}

TEST_CASE("for_index covers every slot identically under both execs") {
  const std::size_t n = 257;
  std::vector<double> serial(n, -1.0);
  std::vector<double> openmp(n, -2.0);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      const double x = 0.1 * static_cast<double>(i);
      out[i] = std::sin(x) + std::sqrt(x + 1.0) * static_cast<double>(i % 7);
    };
  };
  parallel::for_index(n, Exec::serial, fill(serial));
  parallel::for_index(n, Exec::openmp, fill(openmp));
  CHECK(serial == openmp);

  SUBCASE("empty range calls nothing") {
    int calls = 0;
    parallel::for_index(0, Exec::openmp, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
  }

  SUBCASE("default overload follows the process default") {
    ExecGuard guard;
    parallel::set_default_exec(Exec::serial);
    std::vector<double> via_default(n, 0.0);
    parallel::for_index(n, fill(via_default));
    CHECK(via_default == serial);
  }
}

TEST_CASE("model evaluation is bitwise identical across execs") {
  const TimeWindow window{0.0, 20.0};
  const Dataset ds = oracles::random_dataset(4, window, 7, 91);

  SUBCASE("penalized stick variant with all gradients") {
    const ModelState st = oracles::random_state(Variant::banppa, 4, 3, 6, window, 17);
    AugLagMultipliers mult = AugLagMultipliers::initial(3, 2.0);
    mult.w[1] = -0.75;
    const Evaluation a =
        evaluate_model(st, &mult, ds, default_gtable(), GradRequest::all(), Exec::serial);
    const Evaluation b =
        evaluate_model(st, &mult, ds, default_gtable(), GradRequest::all(), Exec::openmp);
    require_bitwise(a, b);
  }

  SUBCASE("point-weight variant with all gradients") {
    const ModelState st = oracles::random_state(Variant::lppa, 4, 3, 6, window, 29);
    const Evaluation a =
        evaluate_model(st, nullptr, ds, default_gtable(), GradRequest::all(), Exec::serial);
    const Evaluation b =
        evaluate_model(st, nullptr, ds, default_gtable(), GradRequest::all(), Exec::openmp);
    require_bitwise(a, b);
  }

  SUBCASE("gradient-free probe") {
    const ModelState st = oracles::random_state(Variant::banppa_nc, 4, 3, 6, window, 41);
    const Evaluation a =
        evaluate_model(st, nullptr, ds, default_gtable(), GradRequest::none(), Exec::serial);
    const Evaluation b =
        evaluate_model(st, nullptr, ds, default_gtable(), GradRequest::none(), Exec::openmp);
    require_bitwise(a, b);
  }
}
