#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace kacsphere {

inline constexpr double kAtomFloor = 1e-300;

/// Sign-and-log representation for quantities that overflow doubles,
/// e.g. |S^{N-1}| N^{(N-1)/2} with N in the thousands.
struct LogScaled {
  double log_magnitude = -std::numeric_limits<double>::infinity();
  int sign = 0;  // 0 iff the represented value is exactly zero

  static LogScaled zero() { return {}; }
  static LogScaled from_value(double x);
  static LogScaled from_log(double log_mag, int sign = 1);

  double value() const;  // may over/underflow, by construction of the type
  LogScaled operator*(const LogScaled& o) const;
  LogScaled operator/(const LogScaled& o) const;
};

// log |S^{n-1}| = log 2 + (n/2) log pi - lgamma(n/2); exact for all n >= 1
double log_sphere_area(int n);

// (2/N)^{k/2} Gamma((N+k)/2) / Gamma(N/2) via log-Gamma.
// Equals E[(Y/sqrt(N))^k] for Y ~ chi(N); for even k = 2l it is the
// product prod_{i=0}^{l-1} (1 + 2i/N).
double gamma_ratio_factor(int N, double k);

// sup_N gamma_ratio_factor(N, k); decreasing in N, attained at N = 2.
double gamma_ratio_sup(double k);

// ---------------------------------------------------------------------------
// quadrature grids

struct Grid1D {
  std::vector<double> points;   // strictly increasing, inside [lo, hi]
  std::vector<double> weights;  // nonnegative quadrature weights
  double lo = 0.0;
  double hi = 0.0;

  std::size_t size() const { return points.size(); }
  double integrate(const std::vector<double>& vals) const;
  double integrate(const std::function<double(double)>& fn) const;
  void validate() const;  // throws std::invalid_argument on a broken grid
};

// Gauss-Legendre nodes/weights on [-1, 1]
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Composite Gauss-Legendre panels on [lo, hi]. Panel boundaries are aligned
// to the given interior knots. graded_levels > 0 adds geometrically shrinking
// panels toward both endpoints (for integrands with weak endpoint
// singularities like f log f at a support edge).
Grid1D make_panel_grid(double lo, double hi, const std::vector<double>& knots,
                       int panels, int pts_per_panel, int graded_levels = 0);

// Grid on [-sqrt(N), sqrt(N)] with nodes v = sqrt(N) sin(theta) and the
// Jacobian folded into the weights. Absorbs (1 - v^2/N)^{p} endpoint
// behaviour of sphere-marginal integrands, p >= -1/2.
Grid1D make_sphere_grid(double N, int panels, int pts_per_panel);

// A sampled function on a grid (not necessarily a probability density).
struct GridFunction {
  Grid1D grid;
  std::vector<double> values;
};

// ---------------------------------------------------------------------------
// interpolation

/// Natural cubic spline on a strictly increasing abscissa.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  double derivative(double x) const;
  bool empty() const { return x_.empty(); }

 private:
  std::vector<double> x_, y_, m_;  // m_ = second derivatives
};

/// Monotone piecewise cubic (Fritsch-Carlson) interpolant.
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  double derivative(double x) const;
  bool empty() const { return x_.empty(); }

 private:
  std::vector<double> x_, y_, d_;  // d_ = node derivatives
};

// ---------------------------------------------------------------------------
// densities of nonnegative variables on [0, u_max] (laws of v^2 and sums
// thereof), uniform grid. alpha = -1/2 marks an integrable endpoint factor:
//   g(u) = u^alpha * smooth(u)
// and `values` tabulates the smooth factor; alpha = 0 tabulates g itself.

struct UDensity {
  double u_max = 0.0;
  double alpha = 0.0;  // 0 or -0.5
  std::vector<double> values;
  std::vector<double> kinks;  // interior u where the smooth factor has a kink
  std::function<double(double)> smooth_eval;  // optional analytic evaluator

  double du() const { return u_max / static_cast<double>(values.size() - 1); }
  std::size_t size() const { return values.size(); }
  double density_at(double u) const;  // u^alpha * smooth(u), interpolated
  double mass() const;                // integral of the represented density
};

struct ConvolveReport {
  double mass_drift = 0.0;      // |prod of per-stage masses - 1|
  int stages = 0;
  double boundary_mass = 0.0;   // mass within 1% of u_max after the power
};

// Density of the sum of N iid copies of `base`, by repeated squaring of
// FFT-domain factors with per-stage renormalisation (drift tracked through
// LogScaled). Throws if the aliasing detector fires (boundary mass > 1e-10).
UDensity fft_convolve_power(const UDensity& base, int N, ConvolveReport* report = nullptr);

// Single linear convolution c = a * b restricted to [0, u_max], trapezoid
// weights with Euler-Maclaurin endpoint corrections. Exposed for tests.
std::vector<double> corrected_convolution(const std::vector<double>& a,
                                          const std::vector<double>& b, double du);

// ---------------------------------------------------------------------------
// quantile machinery

/// Piecewise-linear inverse CDF with table points at density breakpoints
/// (left-continuous inverse across flat CDF stretches).
struct QuantileTable {
  std::vector<double> t;  // CDF values, nondecreasing, in [0, 1]
  std::vector<double> q;  // abscissas
  double operator()(double prob) const;
};

QuantileTable quantile_from_cdf(const std::vector<double>& x, const std::vector<double>& cdf,
                                int resolution);

}  // namespace kacsphere
