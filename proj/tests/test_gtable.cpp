#include <doctest.h>

#include <cmath>
#include <random>
#include <utility>

#include "banppa/gtable.hpp"
#include "banppa/rng.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace banppa;

namespace {

constexpr double kEulerGamma = 0.57721566490153286;

// Monte Carlo estimate of E[ln X^2], X ~ N(mean, sqrt(var)), with its SE.
std::pair<double, double> mc_log_square(double mean, double var, int samples,
                                        std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> draw(mean, std::sqrt(var));
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = draw(rng);
    const double v = std::log(x * x);
    acc += v;
    acc2 += v * v;
  }
  const double m = acc / samples;
  const double sd = std::sqrt((acc2 / samples - m * m) / (samples - 1));
  return {m, sd};
}

}  // namespace

TEST_CASE("G is zero at the origin and negative elsewhere") {
  const GTable& t = default_gtable();
  CHECK(t.value(0.0) == 0.0);
  CHECK(t.value(-1e-8) < 0.0);
  CHECK(t.value(-3.0) < t.value(-1.0));
}

TEST_CASE("G at -50 matches the Monte-Carlo pinned value") {
  // E ln X^2 at mean=10, var=1 inverted through the moment identity.
  CHECK(default_gtable().value(-50.0) == doctest::Approx(-5.87).epsilon(0.004));
}

TEST_CASE("table knots are monotone non-increasing in value") {
  const GTable& t = default_gtable();
  const auto& g = t.knot_values();
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] >= g[i - 1]);  // x ascending to 0
}

TEST_CASE("interpolation error stays below the declared bound") {
  const GTable& t = default_gtable();
  Rng rng = make_rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    // Log-uniform over the table's range, plus points beyond the far edge.
    const double mag = std::pow(10.0, -7.0 + 14.0 * unit(rng));
    const double x = -std::min(mag, 5e6);
    const double approx = t.value(x);
    const double exact = GTable::exact(x);
    CHECK(std::abs(approx - exact) <= t.max_interpolation_error());
  }
}

TEST_CASE("asymptote region agrees with the closed form") {
  const GTable& t = default_gtable();
  for (double x : {-2e6, -1e8, -1e12}) {
    CHECK(t.value(x) == doctest::Approx(-(std::log(-4.0 * x) + kEulerGamma)).epsilon(1e-9));
  }
}

TEST_CASE("stored slopes match finite differences of the interpolant") {
  const GTable& t = default_gtable();
  Rng rng = make_rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double x = -std::pow(10.0, -5.0 + 10.0 * unit(rng));
    const double h = std::max(1e-9, 1e-7 * std::abs(x));
    const double fd = oracles::central_fd([&](double z) { return t.value(z); }, x, h);
    const double an = t.slope(x);
    CHECK(an == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("positive arguments are rejected") {
  CHECK_THROWS_AS(default_gtable().value(1e-9), std::domain_error);
  CHECK_THROWS_AS(expected_log_square(1.0, -1.0), std::domain_error);
  CHECK_THROWS_AS(expected_log_square(1.0, 0.0), std::domain_error);
}

TEST_CASE("log-square moment hits the standard-normal identity") {
  // E ln X^2 for X ~ N(0,1) is psi(1/2) + ln 2 = -euler_gamma - ln 2.
  CHECK(expected_log_square(0.0, 1.0) ==
        doctest::Approx(-kEulerGamma - std::log(2.0)).epsilon(1e-9));
  CHECK(expected_log_square(10.0, 1.0) == doctest::Approx(4.595).epsilon(0.0012));
}

TEST_CASE("log-square moment depends on the mean only through its square") {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> unit(0.1, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double m = unit(rng);
    const double v = unit(rng);
    CHECK(expected_log_square(m, v) == expected_log_square(-m, v));
  }
}

TEST_CASE("log-square moment matches Monte Carlo over a grid") {
  for (double mean : {0.0, 0.7, 2.0, 6.0}) {
    for (double var : {0.2, 1.0, 3.0}) {
      const auto [mc, se] = mc_log_square(mean, var, 200000, 1000 + int(mean * 10 + var));
      CHECK(std::abs(expected_log_square(mean, var) - mc) < 4.0 * se);
    }
  }
}

TEST_CASE("log-square gradients match finite differences") {
  Rng rng = make_rng(8);
  std::uniform_real_distribution<double> unit(0.05, 4.0);
  for (int i = 0; i < 60; ++i) {
    const double m = unit(rng);
    const double v = unit(rng);
    const LogSquareMoment g = expected_log_square_grad(m, v);
    CHECK(g.value == doctest::Approx(expected_log_square(m, v)).epsilon(1e-14));
    const double fm = oracles::central_fd(
        [&](double z) { return expected_log_square(z, v); }, m, 1e-6);
    const double fv = oracles::central_fd(
        [&](double z) { return expected_log_square(m, z); }, v, 1e-6);
    CHECK(g.d_mean == doctest::Approx(fm).epsilon(2e-5));
    CHECK(g.d_var == doctest::Approx(fv).epsilon(2e-5));
  }
}

TEST_CASE("table save and load round trip") {
  GTable::Grid small;
  small.dense_knots = 129;
  small.knots_per_decade = 32;
  const GTable t = GTable::build(small);
  const std::string path = testpaths::fresh_path("gtable");
  t.save(path);
  const GTable back = GTable::load(path);
  CHECK(back == t);
  CHECK(back.value(-12.5) == t.value(-12.5));
}
