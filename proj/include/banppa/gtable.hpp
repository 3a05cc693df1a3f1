#pragma once

#include <string>
#include <vector>

namespace banppa {

// Lookup table for the auxiliary function G(x), x <= 0, that links the
// moments of a Gaussian to the expectation of the log of its square:
//
//   E[ln f^2] = -G(-mean^2 / (2 var)) - euler_gamma + ln(var / 2).
//
// G is built once from an exact series (a Poisson mixture of digamma values,
// the noncentral chi-square log moment) and then evaluated by cubic Hermite
// interpolation. Both the value and the first derivative are stored at every
// knot, so interpolated values and interpolated slopes stay consistent;
// optimizer gradients built on `slope` agree with finite differences of
// `value` to well below the declared error bound.
class GTable {
 public:
  struct Grid {
    double dense_edge = -1.0;    // uniform knots on [dense_edge, 0]
    double far_edge = -1.0e6;    // geometric knots on [far_edge, dense_edge]
    int dense_knots = 1025;
    int knots_per_decade = 256;
    bool operator==(const Grid&) const = default;
  };

  static GTable build();
  static GTable build(const Grid& grid);
  static GTable load(const std::string& path);
  void save(const std::string& path) const;

  double value(double x) const;  // G(x); x <= 0, asymptote below far_edge
  double slope(double x) const;  // dG/dx, positive for x < 0

  // Exact series evaluation, also used to construct the table. Slow path.
  static double exact(double x);
  static double exact_slope(double x);

  // Declared interpolation error bound on [far_edge, 0]; the realized error
  // of this grid is orders of magnitude smaller (see the tests).
  double max_interpolation_error() const { return 1e-4; }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& knot_values() const { return g_; }
  const std::vector<double>& knot_slopes() const { return gp_; }
  bool operator==(const GTable&) const = default;

 private:
  Grid grid_;
  std::vector<double> x_;   // ascending, far_edge .. 0
  std::vector<double> g_;
  std::vector<double> gp_;
  int log_knots_ = 0;       // knots in the geometric region, excluding dense_edge
  double dense_step_ = 0.0;

  std::size_t locate(double x) const;
  void finalize();
};

// Process-wide table built on first use. All high-level entry points share
// it; the CLI `gtable` subcommand persists the same construction.
const GTable& default_gtable();

// E[ln f^2] for f ~ N(mean, var) and its partial derivatives.
struct LogSquareMoment {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
};

double expected_log_square(double mean, double var, const GTable& table = default_gtable());
LogSquareMoment expected_log_square_grad(double mean, double var,
                                         const GTable& table = default_gtable());

}  // namespace banppa
