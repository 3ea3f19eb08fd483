#pragma once

#include <memory>
#include <optional>
#include <string>

#include "kacsphere/density1d.hpp"

namespace kacsphere {

/// Tabulated log Z_N(f, sqrt(u)) over a u-grid together with the CLT
/// deviation field lambda_N(u). Built once, immutable, shared read-only.
///
/// The bridge to the convolution machinery: if h_N is the density of
/// v_1^2 + ... + v_N^2 under f^{⊗N}, then
///   h_N(u) = (|S^{N-1}|/2) u^{(N-2)/2} Z_N(f, sqrt(u)),
/// which follows from the sphere Fubini formula in radial coordinates.
/// The chi-square verification (f Gaussian gives log Z = -(N/2)log 2π - u/2)
/// is part of the test suite.
struct NormalizationCurve {
  int N = 0;
  double sigma_sq = 0.0;  // M4(f) - 1
  double u_lo = 0.0, u_hi = 0.0;  // trusted window (density above noise floor)
  std::vector<double> u;
  std::vector<double> log_z;
  std::vector<double> lambda;  // sqrt(2π)·sqrt(N)Σ·h(u) - exp(-(u-N)²/(2NΣ²))
  double mass_drift = 0.0;

  double log_z_at(double uu) const;  // -inf outside the trusted window
  double dlogz_du(double uu) const;
  double lambda_at(double uu) const;
  double sup_abs_lambda() const;
  void export_csv(const std::string& path) const;

  Pchip interp;
};

// Pushes f through v ↦ v², convolves N-fold, divides out the radial factor.
NormalizationCurve build_zcurve(const Density1D& f, int N, double u_max);

/// Density on Kac's sphere S^{N-1}(sqrt(N)): the uniform density or the
/// conditioned tensorization f^{⊗N}/Z_N(f, sqrt(N)) of a unit-second-moment
/// base density.
struct SphereDensity {
  enum class Family { Uniform, ConditionedTensorization };
  Family family = Family::Uniform;
  int N = 0;
  std::optional<Density1D> base;
  std::shared_ptr<const NormalizationCurve> z_n, z_nm1, z_nm2;

  static SphereDensity uniform(int N);
  static SphereDensity conditioned_tensorization(const Density1D& base, int N,
                                                 double zcurve_u_max = -1.0);
  bool is_uniform() const { return family == Family::Uniform; }
  std::string label() const;
};

// log of the sphere-marginal weight m_N(v) = (|S^{N-2}|/(|S^{N-1}|√N))(1-v²/N)_+^{(N-3)/2}
double log_marginal_weight(int N, double v);

// First marginal Π₁^{(j)}(F_N); identical for every j by symmetry of the
// supported families. Renormalisation drift is reported via *drift.
Density1D marginal1(const SphereDensity& F, int j = 0, double* drift = nullptr);

/// Order-2 marginal on {v₁² + v₂² ≤ N}.
struct SphereMarginal {
  int order = 2;
  int N = 0;
  std::function<double(double, double)> density2;  // normalised
  double support_radius = 0.0;  // sqrt(N)
  double box_half = 0.0;        // the density vanishes outside |v_i| <= box_half
  double mass_drift = 0.0;
  // quadrature of ∫∫ phi · density2 (polar for the radial uniform profile,
  // knot-aligned cartesian panels otherwise)
  std::function<double(const std::function<double(double, double)>&)> integrator;
  double integrate(const std::function<double(double, double)>& phi) const {
    return integrator(phi);
  }
};

SphereMarginal marginal2(const SphereDensity& F);

// Conversion between the line marginal Π₁ and the sphere marginal F_j^{(N)}
// through m_N, in log domain. Weights below 1e-12 are flagged by a zero value.
GridFunction sphere_marginal_from_line(const Density1D& p, int N);
Density1D line_from_sphere_marginal(const GridFunction& fj, int N);

// H_N(F_N); for conditioned tensorizations N·∫ log f dΠ₁ - log Z_N(f, sqrt(N))
double spherical_entropy(const SphereDensity& F);

// Σ_j ∫ F_j^{(N)} log F_j^{(N)} dσ^N = N · ∫ Π₁ log(Π₁/m_N); evaluated along
// two algebraic routes that must agree to 1e-6
double partial_entropy_sum(const SphereDensity& F);

struct SphericalFisherMarginal {
  double value = 0.0;           // I_N(F_j^{(N)})
  double tilted_integral = 0.0; // ∫ (1 - v²/N) |(log Π₁)'|² Π₁
};

// I_N(F_j^{(N)}) through the line reduction; +inf sentinel when the pole
// integral diverges
SphericalFisherMarginal spherical_fisher_marginal(const SphereDensity& F);

// I_N(F_N) for conditioned tensorizations, reduced to the order-2 marginal:
//   I_N(F_N) = (N-1)·( E[v₁² g(v₂)²] - E[v₁ g(v₁) v₂ g(v₂)] ),  g = (log f)'.
// The reduction expands |∇_S log F|² over the rotation generators L_{i,j}
// and uses exchangeability; the uniform density gives 0.
double spherical_fisher_full(const SphereDensity& F);

struct ConditionReport {
  int N = 0;
  double k = 0.0, q = 0.0;
  double a_k = 0.0;       // M_k(Π₁)
  double a_i = 0.0;       // I(Π₁) on the line
  double a_pq = 0.0;      // P_q(Π₁)
  double h_over_n = 0.0;  // H_N / N
  double i_over_n = 0.0;  // I_N(F_N) / N
  bool c_h_positive = false;
};

ConditionReport condition_report(const SphereDensity& F, double k, double q);

}  // namespace kacsphere
