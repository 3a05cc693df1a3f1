#include "banppa/gtable.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

#include "banppa/errors.hpp"
#include "banppa/io_util.hpp"

namespace banppa {

namespace {

constexpr double kEuler = std::numbers::egamma_v<double>;
constexpr double kLn2 = std::numbers::ln2_v<double>;

struct SeriesResult {
  double g;
  double gp;
};

// G(x) as a Poisson(lambda = -x) mixture: the digamma sum gives the log
// moment of a noncentral chi-square, the reciprocal sum its derivative.
// Both are accumulated over a 14-sigma window around the Poisson mode and
// renormalized by the captured mass.
SeriesResult series_eval(double lam) {
  if (lam == 0.0) {
    return {0.0, 2.0};
  }
  double sd = std::sqrt(lam + 1.0);
  long jlo = std::max(0L, static_cast<long>(std::floor(lam - 14.0 * sd - 10.0)));
  long jhi = static_cast<long>(std::ceil(lam + 14.0 * sd + 10.0));

  double lp = -lam + static_cast<double>(jlo) * std::log(lam) -
              std::lgamma(static_cast<double>(jlo) + 1.0);
  double p = std::exp(lp);
  double psi_j = boost::math::digamma(static_cast<double>(jlo) + 0.5);

  double mass = 0.0, sum_psi = 0.0, sum_inv = 0.0;
  for (long j = jlo; j <= jhi; ++j) {
    double half = static_cast<double>(j) + 0.5;
    mass += p;
    sum_psi += p * psi_j;
    sum_inv += p / half;
    p *= lam / static_cast<double>(j + 1);
    psi_j += 1.0 / half;
  }
  sum_psi /= mass;
  sum_inv /= mass;
  return {-(kEuler + 2.0 * kLn2 + sum_psi), sum_inv};
}

double hermite(double x0, double x1, double g0, double g1, double d0, double d1, double x) {
  double h = x1 - x0;
  double t = (x - x0) / h;
  double omt = 1.0 - t;
  double h00 = (1.0 + 2.0 * t) * omt * omt;
  double h10 = t * omt * omt;
  double h01 = t * t * (3.0 - 2.0 * t);
  double h11 = t * t * (t - 1.0);
  return h00 * g0 + h * h10 * d0 + h01 * g1 + h * h11 * d1;
}

double hermite_slope(double x0, double x1, double g0, double g1, double d0, double d1, double x) {
  double h = x1 - x0;
  double t = (x - x0) / h;
  double dh00 = 6.0 * t * t - 6.0 * t;
  double dh10 = 3.0 * t * t - 4.0 * t + 1.0;
  double dh01 = 6.0 * t - 6.0 * t * t;
  double dh11 = 3.0 * t * t - 2.0 * t;
  return (dh00 * g0 + dh01 * g1) / h + dh10 * d0 + dh11 * d1;
}

}  // namespace

double GTable::exact(double x) {
  if (!(x <= 0.0)) throw std::domain_error("GTable::exact: argument must be <= 0");
  return series_eval(-x).g;
}

double GTable::exact_slope(double x) {
  if (!(x <= 0.0)) throw std::domain_error("GTable::exact_slope: argument must be <= 0");
  return series_eval(-x).gp;
}

void GTable::finalize() {
  double decades = std::log10(-grid_.far_edge) - std::log10(-grid_.dense_edge);
  log_knots_ = static_cast<int>(std::lround(decades * grid_.knots_per_decade));
  dense_step_ = -grid_.dense_edge / static_cast<double>(grid_.dense_knots - 1);
}

GTable GTable::build() { return build(Grid{}); }

GTable GTable::build(const Grid& grid) {
  if (!(grid.far_edge < grid.dense_edge && grid.dense_edge < 0.0)) {
    throw std::invalid_argument("GTable::build: edges must satisfy far < dense < 0");
  }
  if (grid.dense_knots < 2 || grid.knots_per_decade < 1) {
    throw std::invalid_argument("GTable::build: grid too coarse");
  }
  GTable t;
  t.grid_ = grid;
  t.finalize();

  double lg_far = std::log10(-grid.far_edge);
  t.x_.reserve(static_cast<std::size_t>(t.log_knots_ + grid.dense_knots));
  for (int j = 0; j < t.log_knots_; ++j) {
    t.x_.push_back(-std::pow(10.0, lg_far - static_cast<double>(j) / grid.knots_per_decade));
  }
  for (int i = 0; i < grid.dense_knots; ++i) {
    t.x_.push_back(grid.dense_edge + static_cast<double>(i) * t.dense_step_);
  }
  t.x_.back() = 0.0;  // pin the endpoint so G(0) is stored exactly

  t.g_.resize(t.x_.size());
  t.gp_.resize(t.x_.size());
  for (std::size_t i = 0; i < t.x_.size(); ++i) {
    auto r = series_eval(-t.x_[i]);
    t.g_[i] = r.g;
    t.gp_[i] = r.gp;
  }
  return t;
}

std::size_t GTable::locate(double x) const {
  if (x >= grid_.dense_edge) {
    auto i = static_cast<long>((x - grid_.dense_edge) / dense_step_);
    i = std::clamp(i, 0L, static_cast<long>(grid_.dense_knots) - 2);
    return static_cast<std::size_t>(log_knots_ + i);
  }
  double u = (std::log10(-grid_.far_edge) - std::log10(-x)) * grid_.knots_per_decade;
  auto j = static_cast<long>(std::floor(u));
  j = std::clamp(j, 0L, static_cast<long>(log_knots_) - 1);
  // log10 rounding can point one segment off right at a knot; nudge back so
  // the bracketing invariant holds. Hermite continuity makes ties harmless.
  while (j > 0 && x < x_[static_cast<std::size_t>(j)]) --j;
  while (j + 2 < static_cast<long>(x_.size()) && x > x_[static_cast<std::size_t>(j + 1)]) ++j;
  return static_cast<std::size_t>(j);
}

double GTable::value(double x) const {
  if (!(x <= 0.0)) throw std::domain_error("GTable::value: argument must be <= 0");
  if (x < grid_.far_edge) return -(kEuler + std::log(-4.0 * x));
  std::size_t s = locate(x);
  return hermite(x_[s], x_[s + 1], g_[s], g_[s + 1], gp_[s], gp_[s + 1], x);
}

double GTable::slope(double x) const {
  if (!(x <= 0.0)) throw std::domain_error("GTable::slope: argument must be <= 0");
  if (x < grid_.far_edge) return -1.0 / x;
  std::size_t s = locate(x);
  return hermite_slope(x_[s], x_[s + 1], g_[s], g_[s + 1], gp_[s], gp_[s + 1], x);
}

void GTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write table: " + path);
  out << "banppa-gtable 1\n";
  out << "grid " << to_exact_string(grid_.dense_edge) << ' ' << to_exact_string(grid_.far_edge)
      << ' ' << grid_.dense_knots << ' ' << grid_.knots_per_decade << '\n';
  out << "knots " << x_.size() << '\n';
  for (std::size_t i = 0; i < x_.size(); ++i) {
    out << to_exact_string(x_[i]) << ' ' << to_exact_string(g_[i]) << ' '
        << to_exact_string(gp_[i]) << '\n';
  }
  if (!out) throw DataError("short write: " + path);
}

GTable GTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open table: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "banppa-gtable" || version != 1) {
    throw DataError(path + ": not a version-1 table file");
  }
  GTable t;
  std::string key;
  if (!(in >> key >> t.grid_.dense_edge >> t.grid_.far_edge >> t.grid_.dense_knots >>
        t.grid_.knots_per_decade) ||
      key != "grid") {
    throw DataError(path + ": malformed grid line");
  }
  std::size_t n = 0;
  if (!(in >> key >> n) || key != "knots") throw DataError(path + ": malformed knot count");
  t.x_.resize(n);
  t.g_.resize(n);
  t.gp_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> t.x_[i] >> t.g_[i] >> t.gp_[i])) {
      throw DataError(path + ": truncated knot table");
    }
  }
  t.finalize();
  if (t.x_.size() != static_cast<std::size_t>(t.log_knots_ + t.grid_.dense_knots) ||
      t.x_.back() != 0.0) {
    throw DataError(path + ": knot table inconsistent with declared grid");
  }
  return t;
}

const GTable& default_gtable() {
  static const GTable table = GTable::build();
  return table;
}

double expected_log_square(double mean, double var, const GTable& table) {
  if (!(var > 0.0)) throw std::domain_error("expected_log_square: variance must be positive");
  double x = -(mean * mean) / (2.0 * var);
  return -table.value(x) - kEuler + std::log(0.5 * var);
}

LogSquareMoment expected_log_square_grad(double mean, double var, const GTable& table) {
  if (!(var > 0.0)) throw std::domain_error("expected_log_square_grad: variance must be positive");
  double x = -(mean * mean) / (2.0 * var);
  double s = table.slope(x);
  LogSquareMoment out;
  out.value = -table.value(x) - kEuler + std::log(0.5 * var);
  out.d_mean = s * mean / var;
  out.d_var = (1.0 + x * s) / var;
  return out;
}

}  // namespace banppa
