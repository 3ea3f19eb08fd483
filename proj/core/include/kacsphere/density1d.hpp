#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kacsphere/numerics.hpp"

namespace kacsphere {

/// One-dimensional probability density on a compact (or truncated) support,
/// carried as grid values plus optional analytic evaluators for the built-in
/// families. Immutable after finalize().
struct Density1D {
  Grid1D grid;
  std::vector<double> values;
  std::optional<std::vector<double>> derivative_values;
  std::string label;
  std::vector<double> knots;  // interior breakpoints of the pdf, if any

  std::function<double(double)> pdf_fn;   // analytic pdf, optional
  std::function<double(double)> dpdf_fn;  // analytic derivative, optional

  double pdf(double v) const;   // 0 outside the support
  double dpdf(double v) const;  // throws if no derivative is available
  bool has_derivative() const { return derivative_values.has_value() || dpdf_fn; }

  void finalize();  // samples evaluators / builds splines, then validates
  void validate() const;

  std::shared_ptr<const CubicSpline> value_spline;
  std::shared_ptr<const CubicSpline> deriv_spline;
};

// built-in families
Density1D gaussian_density(double variance = 1.0);      // truncated at ±12σ, renormalised
Density1D uniform_density(double a, double b);          // no derivative table (jumps at the ends)
Density1D bump_density(double R = 1.0);                 // C¹ quadratic spline, M₂ = 1
Density1D density_from_csv(const std::string& path, double* renormalization = nullptr);

struct MomentReport {
  double k = 0.0;
  double value = 0.0;
  std::string label;
};

// M_k(f) = ∫ |v|^k f(v) dv
double moment(const Density1D& f, double k);
MomentReport moment_report(const Density1D& f, double k);

// H(f|g) = ∫ f log(f/g); contributions where f < atom_floor count as 0.
// Returns +inf (with optional diagnostic) when f sits where g vanishes.
double relative_entropy(const Density1D& f, const Density1D& g,
                        std::string* diagnostic = nullptr);

// H(f|γ) with the standard Gaussian handled in closed form:
// ∫ f log f + (1/2) log 2π + M₂(f)/2
double relative_entropy_vs_gaussian(const Density1D& f);

// I(f) = ∫ ((log f)')² f over {f > atom_floor}
double fisher_information(const Density1D& f);

// I(f|γ) = I(f) + M₂(f) - 2
double relative_fisher_gaussian(const Density1D& f);
// direct quadrature of ∫ |(log(f/γ))'|² f, for cross-checks
double relative_fisher_gaussian_direct(const Density1D& f);

// P_q = ∫ f(v) (1 - v²/N)^{-q/(q-2)} dv; +inf sentinel when the quadrature
// does not stabilise under edge refinement
double pole_control(const Density1D& f, int N, double q);

// returns I(f)^{1/2} and checks that it dominates the grid maximum of f
double supnorm_via_fisher(const Density1D& f);

// piecewise-linear inverse CDF (left-continuous across flat stretches)
QuantileTable quantile_table(const Density1D& f, int resolution);

// pushforward of f through v ↦ v²; smooth factor of u^{-1/2} g(u) tabulated
UDensity square_pushforward(const Density1D& f, double u_max, int n_cells);

}  // namespace kacsphere
