#pragma once

#include "kacsphere/sphere.hpp"

namespace kacsphere {

/// First marginal of the Euclidean extension F̃_N(v) = F_N(√N v/|v|) γ_N(v).
/// Equal in law to X·Y/√N with X ~ Π₁(F_N) and Y ~ chi(N) independent, which
/// is the substituted (y = √N v/x) form of the marginal kernel.
struct ExtensionMarginal {
  Density1D density;
  int N = 0;
  double mass_drift = 0.0;  // before renormalisation
};

ExtensionMarginal extension_marginal1(const SphereDensity& F);

// direct x-integral of the kernel (|S^{N-1}| N^{N/2}/(2π)^{N/2})
// ∫ Π₁(x) v^{N-1} x^{-N} e^{-N v²/(2x²)} dx, for cross-checking the
// substituted route at selected v
double extension_marginal1_direct_at(const SphereDensity& F, double v);

// relative slack of M_k(Π₁(F̃)) against gamma_ratio_factor(N,k)·M_k(Π₁(F))
double extension_moment_identity_check(const SphereDensity& F, double k);

// |H(F̃|γ_N) - H_N|, the left side re-derived independently by conditioning
// on the first coordinate (uses the N-1 and N-2 normalization curves)
double extension_entropy_consistency(const SphereDensity& F);

// H_N - N·H(Π₁(F̃)|γ) >= 0 up to tolerance
double euclidean_superadditivity_check(const SphereDensity& F);

}  // namespace kacsphere
