#pragma once

#include "kacsphere/extension.hpp"
#include "kacsphere/sphere.hpp"

namespace kacsphere {

struct BoundEntry {
  std::string name;
  double value = 0.0;
  double slack = 0.0;  // value - exact, nonnegative on pass
};

struct TransportReport {
  double q = 0.0;
  double exact = 0.0;  // quantile-coupling W_q
  std::vector<BoundEntry> bounds;
};

// W_q(f,g) = (∫₀¹ |F⁻¹ - G⁻¹|^q dt)^{1/q}; graded panels toward t ∈ {0,1},
// result refined until two quantile resolutions agree to 1e-6
double wasserstein_exact(const Density1D& f, const Density1D& g, double q);

struct W1SphereReport {
  double w1_exact = 0.0;
  double bound_b1 = 0.0;  // (2 M₂(Π₁))^{1/2} (1 - E[chi(N)]/√N)^{1/2}
  double slack = 0.0;
  double tau_hat = 0.0;   // B₁ √(2N/M₂) - 1, the measured counterpart of τ_N
  double m2_line = 0.0;
};

W1SphereReport w1_sphere_bound(const SphereDensity& F);
W1SphereReport w1_sphere_bound(const Density1D& pi1, const Density1D& pi1_ext, int N);

struct HMLiftReport {
  double wq_exact = 0.0;
  double bound = 0.0;  // 2^{1+1/q} M_k^{1/k} W1^{1/q - 1/k}
  double slack = 0.0;
  double w1 = 0.0;
  double m_script_k = 0.0;  // ∫(1+v²)^{k/2} f + ∫(1+v²)^{k/2} g
};

HMLiftReport hm_lift_bound(const Density1D& f, const Density1D& g, double q, double k);

// R^q min(|x-y|,1) + 2^k R^{q-k}(|x|^k + |y|^k) - |x-y|^q, nonnegative for R >= 1
double pointwise_wq_inequality_check(double x, double y, double R, double q, double k);

// H(g|γ) + sqrt(I(f|γ)) W₂(f,g) - H(f|γ) >= 0
double hwi_check(const Density1D& f, const Density1D& g);

struct DistortedHwiReport {
  double slack = 0.0;
  double multiplier = 0.0;      // 2^{1/q} [B^{q/(2(q-1))} P_q^{(q-2)/(2(q-1))} + 1 + M₂]^{(q-1)/q}
  double tilted_fisher = 0.0;   // ∫ (1 - v²/N)|(log Π₁)'|² Π₁
  double pole_term = 0.0;       // P_q(Π₁)
  double wq = 0.0;
};

// Hölder-distorted HWI chain of the sphere comparison, p = q/(q-1)
DistortedHwiReport distorted_hwi_check(const SphereDensity& F, double q);
// same, with the marginal pair supplied by the caller
DistortedHwiReport distorted_hwi_check(const SphereDensity& F, const Density1D& pi1,
                                       const Density1D& pi1_ext, double q);

}  // namespace kacsphere
